use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::density::{BipartiteDensityMatrix, Matrix9};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lgmodes::QutritBasis;
use crate::spdc::collapsed_pump;
use crate::turbulence::ScreenPhase;

/// Screens per reduction chunk. Fixed so that the summation tree, and hence
/// every bit of the result, does not depend on the worker count.
const REDUCTION_CHUNK: usize = 32;

/// Per-screen coincidence amplitudes `c[m][p]`, photon A (through the screen)
/// projected on basis element `m`, photon B on `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceAmplitudes {
    pub c: SMatrix<Complex64, 3, 3>,
}

impl CoincidenceAmplitudes {
    /// Flattened in two-qutrit order `3·m + p`.
    pub fn as_vector(&self) -> SVector<Complex64, 9> {
        SVector::from_fn(|k, _| self.c[(k / 3, k % 3)])
    }

    /// `c ⊗ c*` as a 9×9 matrix.
    pub fn outer(&self) -> Matrix9 {
        let v = self.as_vector();
        v * v.adjoint()
    }
}

/// Precomputed `E_m*(x) E_p*(x) exp(-|x|²/w_p²) d²x` on a quadrature grid.
#[derive(Debug, Clone)]
pub struct OverlapKernel {
    grid: GridSpec,
    basis: QutritBasis,
    /// Six distinct products, for `(m, p)` with `m ≤ p`.
    products: Vec<[Complex64; 6]>,
}

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl OverlapKernel {
    pub fn new(basis: &QutritBasis, w_p: f64, grid: GridSpec) -> Result<Self> {
        if !(w_p.is_finite() && w_p > 0.0) {
            return Err(Error::param("w_p", format!("must be positive, got {w_p}")));
        }
        let w0 = basis.w0();
        if grid.spacing > w0 / 8.0 * (1.0 + 1e-12) {
            return Err(Error::InsufficientResolution(format!(
                "grid spacing {:.4e} exceeds w0/8 = {:.4e}",
                grid.spacing,
                w0 / 8.0
            )));
        }
        let need = 8.0 * w0.max(w_p);
        if grid.extent() < need * (1.0 - 1e-12) {
            return Err(Error::InsufficientResolution(format!(
                "grid extent {:.4e} is below 8·max(w0, w_p) = {need:.4e}",
                grid.extent()
            )));
        }
        let xs = grid.coords();
        let ells = basis.ells();
        let da = grid.cell_area();
        let mut products = Vec::with_capacity(grid.len());
        for &y in &xs {
            for &x in &xs {
                let e = ells.map(|l| basis.mode_value(l, x, y).conj());
                let w = collapsed_pump(x, y, w_p) * da;
                products.push(UPPER.map(|(m, p)| e[m] * e[p] * w));
            }
        }
        Ok(Self { grid, basis: *basis, products })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn basis(&self) -> &QutritBasis {
        &self.basis
    }

    /// Quadrature of the kernel against `exp(iθ)` for phase samples laid out
    /// row-major on the kernel grid.
    pub fn amplitudes(&self, phases: &[f64]) -> Result<CoincidenceAmplitudes> {
        if phases.len() != self.products.len() {
            return Err(Error::param(
                "phases",
                format!("expected {} samples, got {}", self.products.len(), phases.len()),
            ));
        }
        let mut acc = [Complex64::new(0.0, 0.0); 6];
        for (k, &theta) in self.products.iter().zip(phases) {
            let (s, c) = theta.sin_cos();
            let ph = Complex64::new(c, s);
            for (a, kv) in acc.iter_mut().zip(k) {
                *a += kv * ph;
            }
        }
        let mut c = SMatrix::<Complex64, 3, 3>::zeros();
        for (&(m, p), v) in UPPER.iter().zip(acc) {
            c[(m, p)] = v;
            c[(p, m)] = v;
        }
        if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvariantViolation("non-finite coincidence amplitude".into()));
        }
        Ok(CoincidenceAmplitudes { c })
    }

    pub fn screen_amplitudes<S: ScreenPhase + ?Sized>(&self, screen: &S) -> Result<CoincidenceAmplitudes> {
        self.amplitudes(&screen.phases_on(&self.grid)?)
    }
}

/// One-off amplitude computation for a single screen.
pub fn screen_coincidence_amplitudes<S: ScreenPhase + ?Sized>(
    screen: &S,
    basis: &QutritBasis,
    w_p: f64,
    grid: GridSpec,
) -> Result<CoincidenceAmplitudes> {
    OverlapKernel::new(basis, w_p, grid)?.screen_amplitudes(screen)
}

/// `normalize(Σ_s c_s ⊗ c_s*)` over a screen ensemble.
pub fn monte_carlo_density_matrix<S: ScreenPhase>(
    screens: &[S],
    basis: &QutritBasis,
    w_p: f64,
    grid: GridSpec,
) -> Result<BipartiteDensityMatrix> {
    if screens.is_empty() {
        return Err(Error::EmptyEnsemble("Monte Carlo channel needs at least one screen"));
    }
    let kernel = OverlapKernel::new(basis, w_p, grid)?;
    monte_carlo_with_kernel(screens, &kernel)
}

/// Same as [`monte_carlo_density_matrix`] with a prebuilt kernel.
pub fn monte_carlo_with_kernel<S: ScreenPhase>(
    screens: &[S],
    kernel: &OverlapKernel,
) -> Result<BipartiteDensityMatrix> {
    if screens.is_empty() {
        return Err(Error::EmptyEnsemble("Monte Carlo channel needs at least one screen"));
    }
    let sum = ordered_outer_sum(screens, kernel)?;
    BipartiteDensityMatrix::from_unnormalized(sum, kernel.basis().ell())
}

/// Unnormalized `Σ c ⊗ c*` with a fixed reduction tree.
pub(crate) fn ordered_outer_sum<S: ScreenPhase>(screens: &[S], kernel: &OverlapKernel) -> Result<Matrix9> {
    let partials: Vec<Matrix9> = screens
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            chunk.iter().try_fold(Matrix9::zeros(), |acc, s| {
                Ok::<_, Error>(acc + kernel.screen_amplitudes(s)?.outer())
            })
        })
        .collect::<Result<_>>()?;
    Ok(partials.into_iter().fold(Matrix9::zeros(), |a, b| a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{analytic_density_matrix, ChannelParams};
    use crate::spdc::initial_state;
    use crate::turbulence::{quadratic_tilt_variance, tilt_ensemble, PhaseScreen, TiltSampling};

    const W0: f64 = 1.0;

    fn setup(ell: u32, alpha: f64) -> (QutritBasis, f64, GridSpec) {
        let basis = QutritBasis::new(ell, W0).unwrap();
        let w_p = W0 / alpha.sqrt();
        let spacing = W0 / 10.0;
        let grid = GridSpec::new((10.0 * w_p.max(W0) / spacing).ceil() as usize, spacing).unwrap();
        (basis, w_p, grid)
    }

    #[test]
    fn zero_screen_reproduces_pure_state() {
        for ell in 1..=3 {
            let (basis, w_p, grid) = setup(ell, 0.59);
            let amps = screen_coincidence_amplitudes(&PhaseScreen::zeros(grid), &basis, w_p, grid).unwrap();
            let ells = basis.ells();
            for m in 0..3 {
                for p in 0..3 {
                    if ells[m] + ells[p] != 0 {
                        assert!(amps.c[(m, p)].norm() < 1e-12);
                    }
                }
            }
            let rho = monte_carlo_density_matrix(&[PhaseScreen::zeros(grid)], &basis, w_p, grid).unwrap();
            let psi = initial_state(&basis, w_p).unwrap().density_matrix();
            assert!(rho.max_abs_difference(&psi) < 1e-9);
        }
    }

    #[test]
    fn constant_screen_is_a_global_phase() {
        let (basis, w_p, grid) = setup(2, 0.59);
        let flat = PhaseScreen::from_fn(grid, |_, _| 0.9);
        let kernel = OverlapKernel::new(&basis, w_p, grid).unwrap();
        let a = kernel.screen_amplitudes(&PhaseScreen::zeros(grid)).unwrap();
        let b = kernel.screen_amplitudes(&flat).unwrap();
        let phase = Complex64::from_polar(1.0, 0.9);
        assert!((b.c - a.c * phase).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn resolution_is_checked() {
        let basis = QutritBasis::new(1, W0).unwrap();
        let coarse = GridSpec::with_extent(32, 12.0).unwrap();
        assert!(matches!(OverlapKernel::new(&basis, 1.3, coarse), Err(Error::InsufficientResolution(_))));
        let small = GridSpec::new(64, W0 / 8.0).unwrap();
        assert!(matches!(OverlapKernel::new(&basis, 1.3, small), Err(Error::InsufficientResolution(_))));
        let empty: [PhaseScreen; 0] = [];
        let (b, wp, g) = setup(1, 0.59);
        assert!(matches!(monte_carlo_density_matrix(&empty, &b, wp, g), Err(Error::EmptyEnsemble(_))));
    }

    fn tilt_error(ell: u32, alpha: f64, xi: f64, count: usize, seed: u64, sampling: TiltSampling) -> f64 {
        let (basis, w_p, grid) = setup(ell, alpha);
        let r0 = w_p * (6.88 / xi).powf(0.6);
        let screens = tilt_ensemble(quadratic_tilt_variance(r0, w_p), count, seed, sampling).unwrap();
        let mc = monte_carlo_density_matrix(&screens, &basis, w_p, grid).unwrap();
        let exact = analytic_density_matrix(ell, &ChannelParams::new(alpha, xi).unwrap()).unwrap();
        mc.max_abs_difference(&exact)
    }

    #[test]
    fn tilt_ensembles_converge_to_quadratic_model() {
        for ell in 1..=3 {
            for alpha in [0.3, 0.59, 1.0] {
                for xi in [0.5, 2.0, 8.0] {
                    let e = tilt_error(ell, alpha, xi, 400, 7, TiltSampling::Stratified);
                    assert!(e < 0.01, "ℓ={ell} α={alpha} ξ={xi}: {e:e}");
                }
            }
        }
    }

    #[test]
    fn independent_tilt_error_shrinks_like_inverse_root_n() {
        // averaged over seeds to tame the spread of single-run errors
        let mean_err = |n: usize| -> f64 {
            (0..12).map(|s| tilt_error(1, 0.59, 2.0, n, 100 + s, TiltSampling::Independent)).sum::<f64>() / 12.0
        };
        let ratio = mean_err(100) / mean_err(1600);
        // 1/√N predicts 4
        assert!((2.4..6.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn reduction_is_bit_stable_across_pools() {
        let (basis, w_p, grid) = setup(1, 0.59);
        let screens = tilt_ensemble(1.0, 200, 3, TiltSampling::Independent).unwrap();
        let kernel = OverlapKernel::new(&basis, w_p, grid).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| monte_carlo_with_kernel(&screens, &kernel)).unwrap();
        let b = four.install(|| monte_carlo_with_kernel(&screens, &kernel)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }
}
