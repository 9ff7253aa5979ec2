//! Turbulence-strength sweep: per `(ℓ, W)` point, synthesize screen
//! realizations, average per-realization density matrices, and compare the
//! negativity with the quadratic-model curve and its closed form.

mod config;
mod output;
mod svg;

pub use config::{ConfigFile, GridSection, OutputSection, SweepSection, TomographySection};
pub use output::{emit_outputs, PointSummary, SweepSummary};

use std::cmp::Ordering;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    analytic_density_matrix, BipartiteDensityMatrix, ChannelParams, CoincidenceAmplitudes,
    OverlapKernel, StrengthConvention,
};
use crate::channel::density::Matrix9;
use crate::entanglement::{negativity, negativity_closed_form, ClosedFormParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lgmodes::QutritBasis;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tomography::{
    simulate_counts, ReconstructionMethod, Reconstructor, DEFAULT_BOOTSTRAP, DEFAULT_INTEGRATION,
};
use crate::turbulence::{
    generate_screen, quadratic_tilt_variance, tilt_ensemble, PhaseScreen, ScreenPhase, ScreenSpec,
    TiltSampling, DEFAULT_SUBGRID_LEVELS,
};

// seed domains
const SCREEN_STREAM: u64 = 1;
const TILT_STREAM: u64 = 2;
const COUNT_STREAM: u64 = 3;
const BOOT_STREAM: u64 = 4;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenModel {
    /// FFT + subharmonic screens with the 5/3 structure function.
    Kolmogorov,
    /// Random tilts, which realize the quadratic structure function.
    Tilt,
}

impl FromStr for ScreenModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kolmogorov" => Ok(ScreenModel::Kolmogorov),
            "tilt" => Ok(ScreenModel::Tilt),
            other => Err(Error::param("screen_model", format!("expected kolmogorov or tilt, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::param("format", format!("expected csv, json or svg, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ell_values: Vec<u32>,
    pub alpha: f64,
    /// Basis waist (m).
    pub w0: f64,
    pub w_max: f64,
    pub w_steps: usize,
    /// Explicit strengths; overrides `w_max`/`w_steps` when set.
    pub w_values: Option<Vec<f64>>,
    pub realizations: usize,
    /// Coincidence rate scale (1/s) for simulated tomography.
    pub flux: f64,
    pub integration: f64,
    /// Per-realization tomography with Poisson counts instead of exact amplitudes.
    pub noise: bool,
    pub bootstrap: usize,
    pub reconstruction: ReconstructionMethod,
    pub master_seed: u64,
    pub grid_n: usize,
    /// Sample spacing (m); defaults to `10·max(w0, w_p) / grid_n`.
    pub grid_delta: Option<f64>,
    pub subgrid_levels: u32,
    pub w_convention: StrengthConvention,
    pub screen_model: ScreenModel,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ell_values: vec![1, 2, 3],
            alpha: 0.59,
            w0: 0.45e-3,
            w_max: 1.5,
            w_steps: 16,
            w_values: None,
            realizations: 25,
            flux: 5.0e3,
            integration: DEFAULT_INTEGRATION,
            noise: false,
            bootstrap: DEFAULT_BOOTSTRAP,
            reconstruction: ReconstructionMethod::Linear,
            master_seed: DEFAULT_SEED,
            grid_n: 512,
            grid_delta: None,
            subgrid_levels: DEFAULT_SUBGRID_LEVELS,
            w_convention: StrengthConvention::W0OverR0,
            screen_model: ScreenModel::Kolmogorov,
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
        }
    }
}

/// `steps` evenly spaced points on `[0, w_max]`.
pub fn uniform_w_grid(w_max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..steps).map(|k| w_max * k as f64 / (steps - 1) as f64).collect(),
    }
}

impl SweepConfig {
    pub fn w_grid(&self) -> Vec<f64> {
        self.w_values.clone().unwrap_or_else(|| uniform_w_grid(self.w_max, self.w_steps))
    }

    /// Effective pump width `w0/√α`.
    pub fn w_p(&self) -> f64 {
        self.w0 / self.alpha.sqrt()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let delta = self
            .grid_delta
            .unwrap_or(10.0 * self.w0.max(self.w_p()) / self.grid_n as f64);
        GridSpec::new(self.grid_n, delta)
    }

    /// Fried parameter at strength `w` (infinite at zero strength).
    pub fn r0(&self, w: f64) -> f64 {
        let ratio = self.w_convention.w0_over_r0(w, self.alpha);
        if ratio == 0.0 { f64::INFINITY } else { self.w0 / ratio }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell_values.is_empty() {
            return Err(Error::param("ell", "at least one ℓ is required"));
        }
        let mut seen = [false; 4];
        for &l in &self.ell_values {
            if !(1..=3).contains(&l) || seen[l as usize] {
                return Err(Error::param("ell", format!("ℓ values must be distinct members of {{1,2,3}}, got {:?}", self.ell_values)));
            }
            seen[l as usize] = true;
        }
        for (name, v) in [("alpha", self.alpha), ("w0", self.w0), ("flux", self.flux), ("integration", self.integration)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let grid = self.w_grid();
        if grid.is_empty() {
            return Err(Error::param("w_grid", "no strengths to sweep"));
        }
        if grid[0] != 0.0 {
            return Err(Error::param("w_grid", format!("must start at 0, starts at {}", grid[0])));
        }
        if grid.windows(2).any(|p| p[1].partial_cmp(&p[0]) != Some(Ordering::Greater)) || grid.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("w_grid", "strengths must be finite and strictly ascending"));
        }
        if self.w_values.is_none() && !(self.w_max.is_finite() && self.w_max >= 0.0) {
            return Err(Error::param("w_max", format!("must be non-negative, got {}", self.w_max)));
        }
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        if self.bootstrap < 2 {
            return Err(Error::param("bootstrap", "must be at least 2"));
        }
        if !self.grid_n.is_power_of_two() || self.grid_n < 128 {
            return Err(Error::param("grid_n", format!("must be a power of two ≥ 128, got {}", self.grid_n)));
        }
        if self.formats.is_empty() {
            return Err(Error::param("format", "at least one output format is required"));
        }
        self.grid()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub ell: u32,
    pub w_index: usize,
    pub w: f64,
    pub w0_over_r0: f64,
    pub wp_over_r0: f64,
    pub xi: f64,
    pub r0: f64,
    /// Yield-weighted average of the per-realization matrices.
    pub rho: BipartiteDensityMatrix,
    pub negativity_mc: f64,
    pub err: f64,
    pub negativity_analytic: f64,
    pub negativity_closed_form: f64,
    pub central_element: f64,
    pub central_element_analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub w_grid: Vec<f64>,
    /// Ordered by ℓ (config order), then by W.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn points_for(&self, ell: u32) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.ell == ell)
    }
}

/// Seeds of the Kolmogorov synthesis calls at one strength; shared by all ℓ.
pub fn screen_seeds(config: &SweepConfig, w_index: usize) -> Vec<u64> {
    (0..config.realizations.div_ceil(2))
        .map(|k| derive_seed(config.master_seed, &[SCREEN_STREAM, w_index as u64, k as u64]))
        .collect()
}

/// Per-realization amplitudes, indexed `[ℓ slot][realization]`.
fn realization_amplitudes(
    config: &SweepConfig,
    grid: GridSpec,
    kernels: &[OverlapKernel],
    w_index: usize,
    r0: f64,
) -> Result<Vec<Vec<CoincidenceAmplitudes>>> {
    let per_screen = |s: &dyn ScreenPhase| -> Result<Vec<CoincidenceAmplitudes>> {
        kernels.iter().map(|k| k.screen_amplitudes(s)).collect()
    };
    let flat: Vec<Vec<CoincidenceAmplitudes>> = match config.screen_model {
        _ if r0.is_infinite() => {
            let amps = per_screen(&PhaseScreen::zeros(grid))?;
            vec![amps; config.realizations]
        }
        ScreenModel::Kolmogorov => {
            let spec = ScreenSpec::new(grid.n, grid.spacing, r0, config.subgrid_levels)?;
            let pairs: Vec<[Vec<CoincidenceAmplitudes>; 2]> = screen_seeds(config, w_index)
                .into_par_iter()
                .map(|seed| {
                    let (re, im) = generate_screen(&spec, seed);
                    Ok([per_screen(&re)?, per_screen(&im)?])
                })
                .collect::<Result<_>>()?;
            let mut flat: Vec<_> = pairs.into_iter().flatten().collect();
            flat.truncate(config.realizations);
            flat
        }
        ScreenModel::Tilt => {
            let sigma2 = quadratic_tilt_variance(r0, config.w_p());
            let seed = derive_seed(config.master_seed, &[TILT_STREAM, w_index as u64]);
            let tilts = tilt_ensemble(sigma2, config.realizations, seed, TiltSampling::Independent)?;
            tilts.par_iter().map(|t| per_screen(t)).collect::<Result<_>>()?
        }
    };
    Ok((0..kernels.len())
        .map(|slot| flat.iter().map(|a| a[slot]).collect())
        .collect())
}

/// A normalized per-realization state with its coincidence yield relative
/// to the turbulence-free yield.
#[derive(Debug, Clone, Copy)]
struct Realization {
    rho: Matrix9,
    weight: f64,
}

/// Yield-weighted average, i.e. the normalized ensemble sum of the
/// unnormalized per-screen states.
fn average(items: &[Realization], ell: u32) -> Result<BipartiteDensityMatrix> {
    let sum = items
        .iter()
        .fold(Matrix9::zeros(), |a, r| a + r.rho * Complex64::from(r.weight));
    BipartiteDensityMatrix::from_unnormalized(sum, ell)
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn negativity_value(rho: &BipartiteDensityMatrix) -> Result<f64> {
    Ok(negativity(rho)?.value)
}

struct PointContext<'a> {
    config: &'a SweepConfig,
    reconstructor: &'a Reconstructor,
    ell: u32,
    w_index: usize,
}

impl PointContext<'_> {
    fn seed(&self, stream: u64, extra: &[u64]) -> u64 {
        let mut path = vec![stream, u64::from(self.ell), self.w_index as u64];
        path.extend_from_slice(extra);
        derive_seed(self.config.master_seed, &path)
    }

    /// Per-realization states, reconstructed from simulated counts when
    /// noise is on. `reference` is the turbulence-free yield `tr(c c†)`.
    fn realizations(&self, amps: &[CoincidenceAmplitudes], reference: f64) -> Result<Vec<Realization>> {
        amps.par_iter()
            .enumerate()
            .map(|(r, a)| {
                let outer = a.outer();
                let weight = outer.trace().re / reference;
                let exact = BipartiteDensityMatrix::from_unnormalized(outer, self.ell)?;
                if !self.config.noise {
                    return Ok(Realization { rho: *exact.matrix(), weight });
                }
                self.measure(&exact, weight, self.seed(COUNT_STREAM, &[r as u64]))
            })
            .collect()
    }

    /// Simulated tomography of a state arriving with relative yield `weight`.
    fn measure(&self, rho: &BipartiteDensityMatrix, weight: f64, seed: u64) -> Result<Realization> {
        let scale = self.config.flux * self.config.integration;
        let counts = simulate_counts(
            rho,
            self.reconstructor.settings(),
            self.config.flux * weight,
            self.config.integration,
            seed,
        )?;
        let (rec, yield_) = self.reconstructor.reconstruct_with_yield(&counts, self.ell)?;
        Ok(Realization { rho: *rec.matrix(), weight: (yield_ / scale).max(0.0) })
    }

    /// Bootstrap standard deviation of the averaged-matrix negativity:
    /// resampling realizations without noise, resampling Poisson counts with it.
    fn bootstrap_error(&self, items: &[Realization]) -> Result<f64> {
        let n = items.len();
        let values: Vec<f64> = (0..self.config.bootstrap)
            .into_par_iter()
            .map(|b| {
                let resampled: Vec<Realization> = if self.config.noise {
                    items
                        .iter()
                        .enumerate()
                        .map(|(r, it)| {
                            let current = BipartiteDensityMatrix::new(it.rho, self.ell)?;
                            self.measure(&current, it.weight, self.seed(BOOT_STREAM, &[b as u64, r as u64]))
                        })
                        .collect::<Result<_>>()?
                } else {
                    let mut rng = rng_from_seed(self.seed(BOOT_STREAM, &[b as u64]));
                    (0..n).map(|_| items[rng.random_range(0..n)]).collect()
                };
                negativity_value(&average(&resampled, self.ell)?)
            })
            .collect::<Result<_>>()?;
        Ok(sample_std(&values))
    }
}

/// Runs the full sweep. Every number is a function of `(config, master_seed)`
/// only; parallel stages collect in index order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid()?;
    let w_p = config.w_p();
    let kernels: Vec<OverlapKernel> = config
        .ell_values
        .iter()
        .map(|&l| OverlapKernel::new(&QutritBasis::new(l, config.w0)?, w_p, grid))
        .collect::<Result<_>>()?;
    let references: Vec<f64> = kernels
        .iter()
        .map(|k| Ok(k.screen_amplitudes(&PhaseScreen::zeros(grid))?.outer().trace().re))
        .collect::<Result<_>>()?;
    let reconstructor = Reconstructor::standard().with_method(config.reconstruction);
    let w_grid = config.w_grid();

    let mut by_w: Vec<Vec<SweepPoint>> = Vec::with_capacity(w_grid.len());
    for (w_index, &w) in w_grid.iter().enumerate() {
        let r0 = config.r0(w);
        let params = ChannelParams::from_strength(config.alpha, w, config.w_convention)?;
        let amps = realization_amplitudes(config, grid, &kernels, w_index, r0)?;
        let mut row = Vec::with_capacity(config.ell_values.len());
        for (slot, &ell) in config.ell_values.iter().enumerate() {
            let ctx = PointContext { config, reconstructor: &reconstructor, ell, w_index };
            let items = ctx.realizations(&amps[slot], references[slot])?;
            let rho = average(&items, ell)?;
            let err = ctx.bootstrap_error(&items)?;
            let analytic = analytic_density_matrix(ell, &params)?;
            let closed = negativity_closed_form(&ClosedFormParams::from_xi(ell, config.alpha, params.xi)?);
            row.push(SweepPoint {
                ell,
                w_index,
                w,
                w0_over_r0: config.w_convention.w0_over_r0(w, config.alpha),
                wp_over_r0: config.w_convention.wp_over_r0(w, config.alpha),
                xi: params.xi,
                r0,
                negativity_mc: negativity_value(&rho)?,
                central_element: rho.central_element(),
                rho,
                err,
                negativity_analytic: negativity_value(&analytic)?,
                negativity_closed_form: closed.value,
                central_element_analytic: analytic.central_element(),
            });
        }
        by_w.push(row);
    }

    let points: Vec<SweepPoint> = (0..config.ell_values.len())
        .flat_map(|slot| by_w.iter().map(move |row| row[slot].clone()))
        .collect();
    let result = SweepResult { config: config.clone(), w_grid, points };
    check_invariants(&result)?;
    Ok(result)
}

/// Post-run checks whose failure makes the run unusable.
pub fn check_invariants(result: &SweepResult) -> Result<()> {
    for &ell in &result.config.ell_values {
        let pts: Vec<&SweepPoint> = result.points_for(ell).collect();
        if let Some(p) = pts.windows(2).find(|p| {
            p[1].negativity_analytic.partial_cmp(&p[0].negativity_analytic) != Some(Ordering::Less)
        }) {
            return Err(Error::InvariantViolation(format!(
                "analytic negativity for ℓ={ell} does not decrease between W={} and W={}",
                p[0].w, p[1].w
            )));
        }
        for p in &pts {
            if (p.negativity_analytic - p.negativity_closed_form).abs() > 1e-9 {
                return Err(Error::InvariantViolation(format!(
                    "closed form and generating function disagree at ℓ={ell}, W={}: {} vs {}",
                    p.w, p.negativity_closed_form, p.negativity_analytic
                )));
            }
            if !(p.negativity_mc.is_finite() && p.err.is_finite()) {
                return Err(Error::InvariantViolation(format!("non-finite negativity at ℓ={ell}, W={}", p.w)));
            }
        }
    }
    Ok(())
}
