//! Partial transpose and negativity of two-qutrit states.

use serde::{Deserialize, Serialize};

use crate::channel::density::{hermitian_deviation, hermitian_eigenvalues, Matrix9};
use crate::channel::{xi_from_wp_over_r0, BipartiteDensityMatrix, StrengthConvention};
use crate::error::{Error, Result};

const NEGATIVE_THRESHOLD: f64 = -1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativityMethod {
    Numeric,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub value: f64,
    /// Partial-transpose eigenvalues below the numerical floor (empty for the
    /// closed form).
    pub negative_eigenvalues: Vec<f64>,
    pub method: NegativityMethod,
}

/// Transpose on photon B: `ρ^{T_B}[(a,b),(c,d)] = ρ[(a,d),(c,b)]`.
pub fn partial_transpose(rho: &Matrix9) -> Matrix9 {
    Matrix9::from_fn(|r, c| {
        let (a, b) = (r / 3, r % 3);
        let (cc, d) = (c / 3, c % 3);
        rho[(3 * a + d, 3 * cc + b)]
    })
}

/// `ℰ = ½ Σ (|λ| − λ)` over the partial-transpose spectrum.
pub fn negativity(rho: &BipartiteDensityMatrix) -> Result<NegativityResult> {
    negativity_of_matrix(rho.matrix())
}

/// As [`negativity`] for a raw matrix, which must be Hermitian within 1e-10.
pub fn negativity_of_matrix(rho: &Matrix9) -> Result<NegativityResult> {
    let dev = hermitian_deviation(rho);
    if dev > HERMITIAN_TOL {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let pt = partial_transpose(rho);
    // symmetrize away rounding before the Hermitian solver sees it
    let pt = (pt + pt.adjoint()).unscale(2.0);
    let negative: Vec<f64> = hermitian_eigenvalues(&pt)
        .into_iter()
        .filter(|&l| l < NEGATIVE_THRESHOLD)
        .collect();
    Ok(NegativityResult {
        value: -negative.iter().sum::<f64>(),
        negative_eigenvalues: negative,
        method: NegativityMethod::Numeric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormParams {
    pub ell: u32,
    pub alpha: f64,
    pub eta: f64,
}

impl ClosedFormParams {
    pub fn new(ell: u32, alpha: f64, eta: f64) -> Result<Self> {
        if !(1..=3).contains(&ell) {
            return Err(Error::param("ell", format!("closed forms exist for ℓ = 1, 2, 3, got {ell}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::param("eta", format!("must be non-negative, got {eta}")));
        }
        Ok(Self { ell, alpha, eta })
    }

    /// `η = α ξ / (2 + α)`.
    pub fn from_xi(ell: u32, alpha: f64, xi: f64) -> Result<Self> {
        Self::new(ell, alpha, alpha * xi / (2.0 + alpha))
    }

    /// `η = 6.88 α (w_p/r0)^{5/3} / (2 + α)`, with `w` converted to `w_p/r0`
    /// under the given convention.
    pub fn from_strength(ell: u32, alpha: f64, w: f64, convention: StrengthConvention) -> Result<Self> {
        Self::from_xi(ell, alpha, xi_from_wp_over_r0(convention.wp_over_r0(w, alpha)))
    }
}

fn closed_form_ab(ell: u32, a: f64, e: f64) -> (f64, f64) {
    let e1 = 1.0 + e;
    let e2 = e * e;
    let e3 = e2 * e;
    let e4 = e2 * e2;
    match ell {
        1 => (
            3.0 + a,
            e1 * e1 * a * a + 4.0 * e1 * (1.0 + 2.0 * e) * a + 4.0 * (3.0 + 6.0 * e + 5.0 * e2),
        ),
        2 => (
            2.0 * (6.0 + 10.0 * e + 7.0 * e2) + 2.0 * e1 * e1 * (4.0 + a) * a,
            8.0 * (6.0 + 16.0 * e + 24.0 * e2 + 18.0 * e3 + 7.0 * e4)
                + 4.0 * e1 * e1 * (4.0 * (2.0 + 4.0 * e + 3.0 * e2) + (6.0 + 12.0 * e + 7.0 * e2) * a) * a
                + e1.powi(4) * (8.0 + a) * a.powi(3),
        ),
        3 => {
            let e5 = e4 * e;
            let e6 = e3 * e3;
            (
                6.0 * (8.0 + 24.0 * e + 36.0 * e2 + 24.0 * e3 + 9.0 * e4)
                    + e1 * e1 * (4.0 + 6.0 * e + 3.0 * e2) * (12.0 + 6.0 * a + a * a) * a,
                16.0 * (12.0 + 48.0 * e + 108.0 * e2 + 138.0 * e3 + 105.0 * e4 + 45.0 * e5 + 11.0 * e6)
                    + 4.0
                        * e1.powi(3)
                        * (12.0 * (4.0 + 12.0 * e + 12.0 * e2 + 5.0 * e3)
                            + 6.0 * (10.0 + 30.0 * e + 30.0 * e2 + 11.0 * e3) * a
                            + (40.0 + 120.0 * e + 120.0 * e2 + 41.0 * e3) * a * a)
                        * a
                    + e1.powi(6) * (60.0 + 12.0 * a + a * a) * a.powi(4),
            )
        }
        _ => unreachable!("validated by ClosedFormParams::new"),
    }
}

/// `ℰ_ℓ = 4 (1+η) A_ℓ / B_ℓ` with the rational closed forms of the quadratic
/// structure-function model for ℓ = 1, 2, 3.
pub fn negativity_closed_form(params: &ClosedFormParams) -> NegativityResult {
    let (a, b) = closed_form_ab(params.ell, params.alpha, params.eta);
    NegativityResult {
        value: 4.0 * (1.0 + params.eta) * a / b,
        negative_eigenvalues: Vec::new(),
        method: NegativityMethod::ClosedForm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{analytic_density_matrix, ChannelParams};
    use crate::spdc::PureProjectedState;
    use approx::assert_abs_diff_eq;
    use nalgebra::SVector;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn from_vector(v: SVector<Complex64, 9>) -> BipartiteDensityMatrix {
        BipartiteDensityMatrix::from_unnormalized(v * v.adjoint(), 1).unwrap()
    }

    #[test]
    fn maximally_mixed_has_zero_negativity() {
        let rho = BipartiteDensityMatrix::new(Matrix9::identity().unscale(9.0), 1).unwrap();
        let n = negativity(&rho).unwrap();
        assert_eq!(n.value, 0.0);
        assert!(n.negative_eigenvalues.is_empty());
    }

    #[test]
    fn maximally_entangled_qutrits() {
        let mut v = SVector::<Complex64, 9>::zeros();
        for k in 0..3 {
            v[4 * k] = Complex64::from(1.0);
        }
        let n = negativity(&from_vector(v)).unwrap();
        assert_abs_diff_eq!(n.value, 1.0, epsilon = 1e-12);
        assert_eq!(n.negative_eigenvalues.len(), 3);
    }

    #[test]
    fn embedded_bell_state() {
        let mut v = SVector::<Complex64, 9>::zeros();
        v[0] = Complex64::from(1.0);
        v[4] = Complex64::from(1.0);
        let n = negativity(&from_vector(v)).unwrap();
        assert_eq!(n.negative_eigenvalues.len(), 1);
        assert_abs_diff_eq!(n.negative_eigenvalues[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn pure_projected_state_negativity() {
        for (a0, al) in [(0.8, 0.3), (0.5, 0.5), (1.0, 0.05)] {
            let psi = PureProjectedState::new(2, a0, al).unwrap();
            let n = negativity(&psi.density_matrix()).unwrap().value;
            assert_abs_diff_eq!(n, psi.negativity(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = Matrix9::identity().unscale(9.0);
        m[(1, 2)] = Complex64::new(0.0, 1e-6);
        assert!(matches!(negativity_of_matrix(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn anchors_without_turbulence() {
        let expect = [0.97633, 0.90475, 0.79558];
        for (ell, want) in (1..=3).zip(expect) {
            let p = ClosedFormParams::new(ell, 0.59, 0.0).unwrap();
            assert_abs_diff_eq!(negativity_closed_form(&p).value, want, epsilon = 1e-5);
        }
        // α → 0 is maximally entangled
        for ell in 1..=3 {
            let p = ClosedFormParams::new(ell, 1e-9, 0.0).unwrap();
            assert_abs_diff_eq!(negativity_closed_form(&p).value, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_form_matches_generating_function() {
        for ell in 1..=3 {
            for alpha in [0.3, 0.59, 1.0] {
                for k in 0..20 {
                    let eta = 10.0 * f64::from(k) / 19.0;
                    let cf = negativity_closed_form(&ClosedFormParams::new(ell, alpha, eta).unwrap()).value;
                    let rho = analytic_density_matrix(ell, &ChannelParams::from_eta(alpha, eta).unwrap()).unwrap();
                    let num = negativity(&rho).unwrap().value;
                    assert!((cf - num).abs() <= 1e-9, "ℓ={ell} α={alpha} η={eta}: {cf} vs {num}");
                }
            }
        }
    }

    #[test]
    fn ordering_and_crossing() {
        let at = |ell, w| {
            negativity_closed_form(
                &ClosedFormParams::from_strength(ell, 0.59, w, StrengthConvention::WpOverR0).unwrap(),
            )
            .value
        };
        assert!(at(1, 0.0) > at(2, 0.0) && at(2, 0.0) > at(3, 0.0));
        let crossed = (1..=150).any(|k| {
            let w = 0.01 * f64::from(k);
            at(1, w) < at(2, w) || at(2, w) < at(3, w) || at(1, w) < at(3, w)
        });
        assert!(crossed);
    }

    proptest! {
        #[test]
        fn closed_form_stays_positive(ell in 1u32..=3, alpha in 0.01f64..5.0, eta in 0.0f64..1e4) {
            let n = negativity_closed_form(&ClosedFormParams::new(ell, alpha, eta).unwrap()).value;
            prop_assert!(n > 0.0 && n <= 1.0);
        }

        #[test]
        fn partial_transpose_involution_and_trace(
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81),
        ) {
            let g = Matrix9::from_iterator(seed.into_iter().map(|(a, b)| Complex64::new(a, b)));
            let rho = g * g.adjoint();
            let pt = partial_transpose(&rho);
            prop_assert_eq!(partial_transpose(&pt), rho);
            prop_assert_eq!(pt.trace(), rho.trace());
            prop_assert!(hermitian_deviation(&pt) < 1e-12);
        }

        #[test]
        fn product_states_are_not_entangled(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
        ) {
            let va = SVector::<Complex64, 3>::from_iterator(a.into_iter().map(|(x, y)| Complex64::new(x, y)));
            let vb = SVector::<Complex64, 3>::from_iterator(b.into_iter().map(|(x, y)| Complex64::new(x, y)));
            prop_assume!(va.norm() > 0.1 && vb.norm() > 0.1);
            let v = va.kronecker(&vb);
            let n = negativity(&from_vector(v)).unwrap();
            prop_assert!(n.value < 1e-10);
            prop_assert!(hermitian_eigenvalues(&partial_transpose(&(v * v.adjoint()))).iter().all(|&l| l > -1e-10));
        }
    }
}
