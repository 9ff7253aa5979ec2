//! Laguerre-Gaussian modes, their normalization, and the single-parameter
//! generating function used to build the qutrit basis `{E_{0,-ℓ}, E_{0,0}, E_{0,+ℓ}}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LgIndex {
    pub p: u32,
    pub ell: i32,
}

impl LgIndex {
    pub const fn new(p: u32, ell: i32) -> Self {
        Self { p, ell }
    }

    pub fn abs_ell(&self) -> u32 {
        self.ell.unsigned_abs()
    }
}

/// Transverse coordinates in units of the waist, longitudinal in units of the
/// Rayleigh range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedCoords {
    pub u: f64,
    pub v: f64,
    pub t: f64,
}

impl NormalizedCoords {
    pub fn in_waist_plane(u: f64, v: f64) -> Self {
        Self { u, v, t: 0.0 }
    }
}

/// Sign of the azimuthal index selecting `x + iy` or `x - iy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Positive,
    Negative,
}

impl Chirality {
    pub fn of(ell: i32) -> Self {
        if ell < 0 {
            Chirality::Negative
        } else {
            Chirality::Positive
        }
    }

    fn imag_sign(self) -> f64 {
        match self {
            Chirality::Positive => 1.0,
            Chirality::Negative => -1.0,
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `[2^{|ℓ|+1} p! / (π (p+|ℓ|)!)]^{1/2}`.
pub fn normalization(idx: LgIndex) -> f64 {
    let l = idx.abs_ell();
    (2f64.powi(l as i32 + 1) * factorial(idx.p) / (PI * factorial(idx.p + l))).sqrt()
}

/// Associated Laguerre polynomial `L_p^{a}(x)` by the three-term recurrence.
pub fn laguerre(p: u32, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..p {
        let k = f64::from(k);
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Dimensionless LG amplitude `E_{p,ℓ}(u, v, t)`.
pub fn lg_amplitude(idx: LgIndex, c: NormalizedCoords) -> Complex64 {
    let l = idx.abs_ell();
    let r2 = c.u * c.u + c.v * c.v;
    let transverse = Complex64::new(c.u, Chirality::of(idx.ell).imag_sign() * c.v);
    let one_plus = Complex64::new(1.0, c.t);
    let one_minus = Complex64::new(1.0, -c.t);
    let gauss = (Complex64::from(r2) / Complex64::new(-1.0, c.t)).exp();
    let lag = laguerre(idx.p, f64::from(l), 2.0 * r2 / (1.0 + c.t * c.t));
    normalization(idx) * transverse.powu(l) * one_plus.powu(idx.p)
        / one_minus.powu(idx.p + l + 1)
        * gauss
        * lag
}

/// `G_± = (1/w0) exp[(x ± iy)μ/w0 - (x²+y²)/w0²]`.
pub fn lg_generating_value(mu: f64, chirality: Chirality, x: f64, y: f64, w0: f64) -> Complex64 {
    let z = Complex64::new(x, chirality.imag_sign() * y) / w0;
    (z * mu - (x * x + y * y) / (w0 * w0)).exp() / w0
}

/// `∂_μ^order G_±`, in closed form `((x ± iy)/w0)^order · G_±`.
pub fn lg_generating_derivative(
    order: u32,
    mu: f64,
    chirality: Chirality,
    x: f64,
    y: f64,
    w0: f64,
) -> Complex64 {
    let z = Complex64::new(x, chirality.imag_sign() * y) / w0;
    z.powu(order) * lg_generating_value(mu, chirality, x, y, w0)
}

/// The three p = 0 modes `{-ℓ, 0, +ℓ}` with a common waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritBasis {
    ell: u32,
    w0: f64,
}

impl QutritBasis {
    pub const DIM: usize = 3;

    pub fn new(ell: u32, w0: f64) -> Result<Self> {
        if !(1..=3).contains(&ell) {
            return Err(Error::param("ell", format!("basis ℓ must be 1, 2 or 3, got {ell}")));
        }
        if !(w0.is_finite() && w0 > 0.0) {
            return Err(Error::param("w0", format!("waist must be positive, got {w0}")));
        }
        Ok(Self { ell, w0 })
    }

    /// Builds a basis from explicit elements. Only the symmetric p = 0 triple
    /// `[(0,-ℓ), (0,0), (0,+ℓ)]` is accepted.
    pub fn from_elements(elements: [LgIndex; 3], w0: f64) -> Result<Self> {
        if let Some(bad) = elements.iter().find(|e| e.p != 0) {
            return Err(Error::param(
                "elements",
                format!("radial index must be 0, got p = {}", bad.p),
            ));
        }
        let ell = elements[2].ell;
        if ell <= 0 || elements[0].ell != -ell || elements[1].ell != 0 {
            return Err(Error::param(
                "elements",
                "expected the ordered symmetric triple (-ℓ, 0, +ℓ)",
            ));
        }
        Self::new(ell as u32, w0)
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn elements(&self) -> [LgIndex; 3] {
        let l = self.ell as i32;
        [LgIndex::new(0, -l), LgIndex::new(0, 0), LgIndex::new(0, l)]
    }

    /// Azimuthal indices in basis order.
    pub fn ells(&self) -> [i32; 3] {
        let l = self.ell as i32;
        [-l, 0, l]
    }

    /// Physical-unit mode `E_{0,ℓ}(x, y)` at the waist (carries the 1/w0 factor).
    pub fn mode_value(&self, ell: i32, x: f64, y: f64) -> Complex64 {
        lg_amplitude(
            LgIndex::new(0, ell),
            NormalizedCoords::in_waist_plane(x / self.w0, y / self.w0),
        ) / self.w0
    }
}

/// Samples `E_{p,ℓ}` at the waist on a physical grid, normalized so that
/// `Σ|E|²·spacing² ≈ 1`.
pub fn sample_mode(idx: LgIndex, w0: f64, grid: GridSpec) -> Result<FieldGrid> {
    if !(w0.is_finite() && w0 > 0.0) {
        return Err(Error::param("w0", format!("waist must be positive, got {w0}")));
    }
    check_mode_resolution(w0, grid)?;
    Ok(FieldGrid::from_fn(grid, |x, y| {
        lg_amplitude(idx, NormalizedCoords::in_waist_plane(x / w0, y / w0)) / w0
    }))
}

pub(crate) fn check_mode_resolution(w0: f64, grid: GridSpec) -> Result<()> {
    if grid.extent() < 8.0 * w0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientResolution(format!(
            "grid extent {:.4e} is below 8·w0 = {:.4e}",
            grid.extent(),
            8.0 * w0
        )));
    }
    if grid.spacing > w0 / 8.0 * (1.0 + 1e-12) {
        return Err(Error::InsufficientResolution(format!(
            "grid spacing {:.4e} exceeds w0/8 = {:.4e}",
            grid.spacing,
            w0 / 8.0
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_grid(w0: f64) -> GridSpec {
        GridSpec::new(160, w0 / 16.0).unwrap()
    }

    #[test]
    fn fundamental_mode_peak() {
        let v = lg_amplitude(LgIndex::new(0, 0), NormalizedCoords::in_waist_plane(0.0, 0.0));
        assert_abs_diff_eq!(v.re, (2.0 / PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0);
    }

    #[test]
    fn vortex_null_at_origin() {
        let v = lg_amplitude(LgIndex::new(0, 1), NormalizedCoords::in_waist_plane(0.0, 0.0));
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn ell_two_on_axis_point() {
        let v = lg_amplitude(LgIndex::new(0, 2), NormalizedCoords::in_waist_plane(1.0, 0.0));
        let expected = (4.0 / PI).sqrt() * (-1.0f64).exp();
        assert_abs_diff_eq!(v.re, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn laguerre_recurrence_matches_explicit_forms() {
        // L_1^a = 1 + a - x, L_2^a = ((x^2 - 2(a+2)x + (a+1)(a+2)) / 2
        for &(a, x) in &[(0.0, 0.3), (2.0, 1.7), (3.0, 4.2)] {
            assert_abs_diff_eq!(laguerre(1, a, x), 1.0 + a - x, epsilon = 1e-14);
            let l2 = (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0)) / 2.0;
            assert_abs_diff_eq!(laguerre(2, a, x), l2, epsilon = 1e-12);
        }
    }

    #[test]
    fn generating_function_at_origin() {
        assert_abs_diff_eq!(
            lg_generating_value(0.0, Chirality::Positive, 0.0, 0.0, 1.0).re,
            1.0
        );
        let (x, y, w0) = (0.4, -0.3, 1.3);
        let g = lg_generating_value(0.0, Chirality::Negative, x, y, w0);
        assert_abs_diff_eq!(g.re, (-(x * x + y * y) / (w0 * w0)).exp() / w0, epsilon = 1e-15);
    }

    #[test]
    fn generating_first_derivative_matches_difference_quotient() {
        let d = lg_generating_derivative(1, 0.0, Chirality::Positive, 1.0, 0.0, 1.0);
        assert_abs_diff_eq!(d.re, (-1.0f64).exp(), epsilon = 1e-15);
        // independent check by a central difference
        let h = 1e-5;
        let fd = (lg_generating_value(h, Chirality::Positive, 1.0, 0.0, 1.0)
            - lg_generating_value(-h, Chirality::Positive, 1.0, 0.0, 1.0))
            / (2.0 * h);
        assert_abs_diff_eq!(fd.re, d.re, epsilon = 1e-9);
    }

    #[test]
    fn generating_derivatives_reproduce_modes() {
        let w0 = 0.7;
        for ell in -3i32..=3 {
            let idx = LgIndex::new(0, ell);
            for &(x, y) in &[(0.1, 0.2), (-0.5, 0.9), (1.3, -0.4), (0.0, 0.0)] {
                let gen = normalization(idx)
                    * lg_generating_derivative(idx.abs_ell(), 0.0, Chirality::of(ell), x, y, w0);
                let direct =
                    lg_amplitude(idx, NormalizedCoords::in_waist_plane(x / w0, y / w0)) / w0;
                assert!((gen - direct).norm() < 1e-10, "ℓ={ell} at ({x},{y})");
            }
        }
    }

    #[test]
    fn sampled_modes_are_orthonormal() {
        let w0 = 1.0;
        let grid = reference_grid(w0);
        for ell in 1..=3 {
            let basis = QutritBasis::new(ell, w0).unwrap();
            let modes: Vec<_> = basis
                .elements()
                .iter()
                .map(|&i| sample_mode(i, w0, grid).unwrap())
                .collect();
            for (i, a) in modes.iter().enumerate() {
                for (j, b) in modes.iter().enumerate() {
                    let ip = a.inner(b);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - target).norm() < 1e-6, "ℓ={ell} ({i},{j}) -> {ip}");
                }
            }
        }
    }

    #[test]
    fn first_order_mode_quadrature_and_orthogonality() {
        let grid = reference_grid(1.0);
        let e1 = sample_mode(LgIndex::new(0, 1), 1.0, grid).unwrap();
        let em1 = sample_mode(LgIndex::new(0, -1), 1.0, grid).unwrap();
        let e0 = sample_mode(LgIndex::new(0, 0), 1.0, grid).unwrap();
        assert_abs_diff_eq!(e1.norm_sqr(), 1.0, epsilon = 1e-6);
        assert!(e1.inner(&em1).norm() < 1e-8);
        assert!(e1.inner(&e0).norm() < 1e-8);
    }

    #[test]
    fn phase_winds_by_two_pi_ell() {
        let basis = QutritBasis::new(3, 1.0).unwrap();
        for &ell in &basis.ells() {
            let steps = 720;
            let mut total = 0.0;
            let mut prev = basis.mode_value(ell, 1.0, 0.0).arg();
            for k in 1..=steps {
                let phi = 2.0 * PI * k as f64 / steps as f64;
                let cur = basis.mode_value(ell, phi.cos(), phi.sin()).arg();
                let mut d = cur - prev;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                total += d;
                prev = cur;
            }
            assert_abs_diff_eq!(total, 2.0 * PI * f64::from(ell), epsilon = 1e-9);
        }
    }

    #[test]
    fn sample_mode_rejects_coarse_or_small_grids() {
        let idx = LgIndex::new(0, 1);
        assert!(matches!(
            sample_mode(idx, 1.0, GridSpec::new(64, 1.0 / 4.0).unwrap()),
            Err(Error::InsufficientResolution(_))
        ));
        assert!(matches!(
            sample_mode(idx, 1.0, GridSpec::new(32, 1.0 / 16.0).unwrap()),
            Err(Error::InsufficientResolution(_))
        ));
    }

    #[test]
    fn basis_rejects_radial_modes_and_asymmetry() {
        let els = [LgIndex::new(1, -1), LgIndex::new(0, 0), LgIndex::new(0, 1)];
        assert!(QutritBasis::from_elements(els, 1.0).is_err());
        let els = [LgIndex::new(0, -1), LgIndex::new(0, 0), LgIndex::new(0, 2)];
        assert!(QutritBasis::from_elements(els, 1.0).is_err());
        let els = [LgIndex::new(0, -2), LgIndex::new(0, 0), LgIndex::new(0, 2)];
        assert_eq!(QutritBasis::from_elements(els, 1.0).unwrap().ell(), 2);
        assert!(QutritBasis::new(0, 1.0).is_err());
        assert!(QutritBasis::new(4, 1.0).is_err());
        assert!(QutritBasis::new(1, -1.0).is_err());
    }
}
