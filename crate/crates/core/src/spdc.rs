//! Down-converted biphoton source: effective pump width, the thin-crystal
//! parameter, the Gaussian phase-matching model, and the initial projected
//! qutrit state.

use std::f64::consts::PI;

use nalgebra::SVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::BipartiteDensityMatrix;
use crate::error::{Error, Result};
use crate::lgmodes::{normalization, LgIndex, QutritBasis};

/// Ordinary index of β-barium borate at 355 nm (Sellmeier, Eimerl et al.).
pub const BBO_ORDINARY_INDEX_355NM: f64 = 1.7055;

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// `1/w_p² = 1/w_raw² + 2/w_smf²`. An infinite `w_smf` means no fibre filtering.
pub fn effective_pump_width(w_p_raw: f64, w_smf: f64) -> Result<f64> {
    let w_p_raw = positive("w_p_raw", w_p_raw)?;
    if w_smf.is_nan() || w_smf <= 0.0 {
        return Err(Error::param("w_smf", format!("must be positive, got {w_smf}")));
    }
    Ok((1.0 / (w_p_raw * w_p_raw) + 2.0 / (w_smf * w_smf)).sqrt().recip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParameter {
    pub beta: f64,
    /// Pump Rayleigh range `π w_p² / λ_p`.
    pub z_rp: f64,
}

/// `β = n_o L λ_p / (π w_p²) = n_o L / z_Rp`.
pub fn beta_parameter(n_o: f64, length: f64, w_p: f64, lambda_p: f64) -> Result<BetaParameter> {
    let n_o = positive("n_o", n_o)?;
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::param("length", format!("must be non-negative, got {length}")));
    }
    let w_p = positive("w_p", w_p)?;
    let lambda_p = positive("lambda_p", lambda_p)?;
    let z_rp = PI * w_p * w_p / lambda_p;
    Ok(BetaParameter {
        beta: n_o * length / z_rp,
        z_rp,
    })
}

/// `w0² / w_p²` for a basis waist measured in an image plane with the given
/// magnification relative to the crystal, where `w_p` is defined.
pub fn imaging_alpha(w0_image: f64, w_p_crystal: f64, magnification: f64) -> f64 {
    let wp = w_p_crystal * magnification;
    w0_image * w0_image / (wp * wp)
}

/// Source geometry, all lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcParams {
    pub lambda_p: f64,
    pub lambda: f64,
    pub w_p_raw: f64,
    pub w_smf: f64,
    pub w_p: f64,
    pub crystal_length: f64,
    pub n_o: f64,
    pub z_rp: f64,
    pub beta: f64,
}

impl SpdcParams {
    /// Degenerate down-conversion (`λ = 2 λ_p`).
    pub fn degenerate(
        lambda_p: f64,
        w_p_raw: f64,
        w_smf: f64,
        crystal_length: f64,
        n_o: f64,
    ) -> Result<Self> {
        let w_p = effective_pump_width(w_p_raw, w_smf)?;
        let BetaParameter { beta, z_rp } = beta_parameter(n_o, crystal_length, w_p, lambda_p)?;
        Ok(Self {
            lambda_p,
            lambda: 2.0 * lambda_p,
            w_p_raw,
            w_smf,
            w_p,
            crystal_length,
            n_o,
            z_rp,
            beta,
        })
    }

    /// 355 nm pump, 0.24 mm pump waist, 0.26 mm back-projected fibre modes,
    /// 3 mm BBO.
    pub fn reference() -> Self {
        Self::degenerate(355e-9, 0.24e-3, 0.26e-3, 3e-3, BBO_ORDINARY_INDEX_355NM)
            .expect("reference geometry is valid")
    }

    pub fn is_thin_crystal(&self) -> bool {
        self.beta < 0.1
    }
}

/// Position-space biphoton amplitude, unnormalized (peak 1):
/// `exp(-|x_s+x_i|²/(4w_p²) - |x_s-x_i|²/(2 w_p² β))`.
pub fn spdc_amplitude_position(x_s: [f64; 2], x_i: [f64; 2], w_p: f64, beta: f64) -> Result<f64> {
    let w_p = positive("w_p", w_p)?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param(
            "beta",
            "β must be positive here; use the collapsed thin-crystal pump for β = 0",
        ));
    }
    let sum2 = (x_s[0] + x_i[0]).powi(2) + (x_s[1] + x_i[1]).powi(2);
    let diff2 = (x_s[0] - x_i[0]).powi(2) + (x_s[1] - x_i[1]).powi(2);
    Ok((-sum2 / (4.0 * w_p * w_p) - diff2 / (2.0 * w_p * w_p * beta)).exp())
}

/// Fourier-space amplitude, unnormalized (peak 1):
/// `exp(-π² w_p² |a_s+a_i|² - ½ π² w_p² β |a_s-a_i|²)`.
pub fn spdc_amplitude_fourier(a_s: [f64; 2], a_i: [f64; 2], w_p: f64, beta: f64) -> f64 {
    let sum2 = (a_s[0] + a_i[0]).powi(2) + (a_s[1] + a_i[1]).powi(2);
    let diff2 = (a_s[0] - a_i[0]).powi(2) + (a_s[1] - a_i[1]).powi(2);
    let k = PI * PI * w_p * w_p;
    (-k * sum2 - 0.5 * k * beta * diff2).exp()
}

/// Thin-crystal pump profile on the diagonal `x_s = x_i = x`.
pub fn collapsed_pump(x: f64, y: f64, w_p: f64) -> f64 {
    (-(x * x + y * y) / (w_p * w_p)).exp()
}

/// `A_0 |0,0⟩ + A_ℓ (|ℓ,-ℓ⟩ + |-ℓ,ℓ⟩)`, normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureProjectedState {
    pub ell: u32,
    pub a0: f64,
    pub a_ell: f64,
}

impl PureProjectedState {
    pub fn new(ell: u32, a0: f64, a_ell: f64) -> Result<Self> {
        if !(a0 >= 0.0 && a_ell >= 0.0 && (a0 > 0.0 || a_ell > 0.0)) {
            return Err(Error::param("amplitudes", "need non-negative, not both zero"));
        }
        let norm = (a0 * a0 + 2.0 * a_ell * a_ell).sqrt();
        Ok(Self {
            ell,
            a0: a0 / norm,
            a_ell: a_ell / norm,
        })
    }

    /// Two-qutrit state vector in basis order `3·i_A + i_B`, `i ∈ {-ℓ, 0, +ℓ}`.
    pub fn state_vector(&self) -> SVector<Complex64, 9> {
        let mut v = SVector::<Complex64, 9>::zeros();
        v[4] = Complex64::from(self.a0);
        v[3 * 2] = Complex64::from(self.a_ell);
        v[2] = Complex64::from(self.a_ell);
        v
    }

    pub fn density_matrix(&self) -> BipartiteDensityMatrix {
        let v = self.state_vector();
        BipartiteDensityMatrix::from_unnormalized(v * v.adjoint(), self.ell)
            .expect("pure state is a valid density matrix")
    }

    /// Pure-state negativity from the Schmidt coefficients `(A_0, A_ℓ, A_ℓ)`.
    pub fn negativity(&self) -> f64 {
        2.0 * self.a0 * self.a_ell + self.a_ell * self.a_ell
    }
}

/// Three-way overlap `∫ m_p E_ℓ* E_{-ℓ}* d²x` for the collapsed pump, in closed
/// form: `𝒩_ℓ² π |ℓ|! / (2+α)^{|ℓ|+1}`.
pub fn pump_overlap(ell: u32, alpha: f64) -> f64 {
    let n = normalization(LgIndex::new(0, ell as i32));
    let fact: f64 = (1..=ell).map(f64::from).product();
    n * n * PI * fact / (2.0 + alpha).powi(ell as i32 + 1)
}

/// Initial (turbulence-free) projected state for a basis and effective pump width.
pub fn initial_state(basis: &QutritBasis, w_p: f64) -> Result<PureProjectedState> {
    let w_p = positive("w_p", w_p)?;
    let alpha = (basis.w0() / w_p).powi(2);
    PureProjectedState::new(basis.ell(), pump_overlap(0, alpha), pump_overlap(basis.ell(), alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::negativity;
    use crate::grid::GridSpec;
    use crate::lgmodes::sample_mode;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn effective_pump_width_reference_geometry() {
        let w = effective_pump_width(0.24e-3, 0.26e-3).unwrap();
        assert_abs_diff_eq!(w * 1e3, 0.146, epsilon = 5e-4);
        assert_abs_diff_eq!(w * 1e3, 0.15, epsilon = 5e-3);
    }

    #[test]
    fn effective_pump_width_limits() {
        assert_relative_eq!(effective_pump_width(0.3, f64::INFINITY).unwrap(), 0.3);
        assert_relative_eq!(
            effective_pump_width(0.3, 0.3).unwrap(),
            0.3 / 3f64.sqrt(),
            max_relative = 1e-14
        );
        assert!(effective_pump_width(0.0, 1.0).is_err());
        assert!(effective_pump_width(1.0, 0.0).is_err());
    }

    #[test]
    fn beta_for_reference_crystal() {
        let b = beta_parameter(1.66, 3e-3, 0.146e-3, 355e-9).unwrap();
        assert_abs_diff_eq!(b.beta, 0.025, epsilon = 2e-3);
        assert_relative_eq!(b.z_rp, PI * (0.146e-3f64).powi(2) / 355e-9, max_relative = 1e-14);
        assert_eq!(beta_parameter(1.66, 0.0, 0.146e-3, 355e-9).unwrap().beta, 0.0);
        let p = SpdcParams::reference();
        assert!(p.is_thin_crystal(), "β = {}", p.beta);
        assert_eq!(p.lambda, 710e-9);
        assert!(p.w_p <= p.w_p_raw.min(p.w_smf / 2f64.sqrt()));
    }

    #[test]
    fn imaging_geometry_gives_reference_alpha() {
        let wp = effective_pump_width(0.24e-3, 0.26e-3).unwrap();
        assert_abs_diff_eq!(imaging_alpha(0.45e-3, wp, 4.0), 0.59, epsilon = 0.01);
    }

    #[test]
    fn position_amplitude_peak_and_symmetry() {
        assert_eq!(spdc_amplitude_position([0.0; 2], [0.0; 2], 1.0, 0.1).unwrap(), 1.0);
        let a = spdc_amplitude_position([0.3, -0.1], [0.05, 0.4], 0.7, 0.2).unwrap();
        let b = spdc_amplitude_position([0.05, 0.4], [0.3, -0.1], 0.7, 0.2).unwrap();
        assert_eq!(a, b);
        assert!(spdc_amplitude_position([0.0; 2], [0.0; 2], 1.0, 0.0).is_err());
    }

    /// The position amplitude separates per transverse axis, so a 2D discrete
    /// Fourier transform over `(x_s, x_i)` along one axis must reproduce the
    /// Fourier-domain model along that axis.
    #[test]
    fn fourier_and_position_models_are_a_transform_pair() {
        let (w_p, beta) = (1.0, 0.5);
        let n = 128;
        let dx = 16.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * dx).collect();
        let f1 = |s: f64, i: f64| {
            (-(s + i).powi(2) / (4.0 * w_p * w_p) - (s - i).powi(2) / (2.0 * w_p * w_p * beta)).exp()
        };
        let transform = |a_s: f64, a_i: f64| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for &s in &xs {
                for &i in &xs {
                    let phase = -2.0 * PI * (a_s * s + a_i * i);
                    acc += Complex64::from_polar(f1(s, i), phase);
                }
            }
            acc.re
        };
        let peak = transform(0.0, 0.0);
        for &(a_s, a_i) in &[(0.1, 0.0), (0.05, 0.12), (-0.2, 0.15), (0.3, 0.3)] {
            let num = transform(a_s, a_i) / peak;
            let model = spdc_amplitude_fourier([a_s, 0.0], [a_i, 0.0], w_p, beta);
            assert_abs_diff_eq!(num, model, epsilon = 1e-6);
        }
    }

    #[test]
    fn flat_pump_limit_is_maximally_entangled() {
        let basis = QutritBasis::new(2, 1e-6).unwrap();
        let s = initial_state(&basis, 1.0).unwrap();
        assert_abs_diff_eq!(s.a0, 1.0 / 3f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.a_ell, 1.0 / 3f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn overlaps_match_grid_quadrature() {
        let (w0, alpha): (f64, f64) = (1.0, 0.59);
        let w_p = w0 / alpha.sqrt();
        let grid = GridSpec::new(256, 10.0 * w_p / 256.0).unwrap();
        for ell in 0..=3i32 {
            let plus = sample_mode(LgIndex::new(0, ell), w0, grid).unwrap();
            let minus = sample_mode(LgIndex::new(0, -ell), w0, grid).unwrap();
            let xs = grid.coords();
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, &y) in xs.iter().enumerate() {
                for (c, &x) in xs.iter().enumerate() {
                    acc += collapsed_pump(x, y, w_p) * (plus.at(r, c) * minus.at(r, c)).conj();
                }
            }
            acc *= grid.cell_area();
            assert_abs_diff_eq!(acc.re, pump_overlap(ell as u32, alpha), epsilon = 1e-9);
            assert_abs_diff_eq!(acc.im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn reference_state_negativity() {
        let basis = QutritBasis::new(1, 1.0).unwrap();
        let s = initial_state(&basis, 1.0 / 0.59f64.sqrt()).unwrap();
        assert_abs_diff_eq!(s.a0 * s.a0 + 2.0 * s.a_ell * s.a_ell, 1.0, epsilon = 1e-14);
        assert!(s.a0 > s.a_ell);
        assert_abs_diff_eq!(s.negativity(), 0.9763, epsilon = 1e-4);
        let numeric = negativity(&s.density_matrix()).unwrap().value;
        assert_abs_diff_eq!(numeric, s.negativity(), epsilon = 1e-12);
    }

    #[test]
    fn initial_negativity_monotone_in_alpha_and_ell() {
        let mut prev_by_ell = [f64::INFINITY; 3];
        for k in 1..40 {
            let alpha = 0.05 * k as f64;
            let mut prev = f64::INFINITY;
            for ell in 1..=3u32 {
                let s = initial_state(&QutritBasis::new(ell, 1.0).unwrap(), alpha.sqrt().recip())
                    .unwrap();
                let n = s.negativity();
                assert!(n < prev, "not decreasing in ℓ at α={alpha}");
                assert!(n < prev_by_ell[ell as usize - 1], "not decreasing in α at ℓ={ell}");
                assert!(s.a0 > s.a_ell);
                prev = n;
                prev_by_ell[ell as usize - 1] = n;
            }
        }
    }
}
