//! Simulated two-qutrit projective tomography: Poisson coincidence counts
//! over 81 local projector pairs, linear-inversion reconstruction and
//! projection to the physical set.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SVector, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::density::Matrix9;
use crate::channel::BipartiteDensityMatrix;
use crate::entanglement::negativity;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Default coincidence accumulation window (s).
pub const DEFAULT_INTEGRATION: f64 = 2.0;
pub const DEFAULT_BOOTSTRAP: usize = 200;

const PARAMS: usize = 81;

/// A pure single-qutrit projector `|ψ⟩⟨ψ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub label: String,
    pub coeffs: [Complex64; 3],
}

impl Projector {
    pub fn new(label: impl Into<String>, coeffs: [Complex64; 3]) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::param("coeffs", format!("projector vector has norm² {norm}")));
        }
        Ok(Self { label: label.into(), coeffs })
    }

    pub fn vector(&self) -> SVector<Complex64, 3> {
        SVector::from(self.coeffs)
    }
}

/// Basis states `e0, e1, e2`, then for each pair `(a, b)` the superpositions
/// `s_ab = (|a⟩+|b⟩)/√2` and `i_ab = (|a⟩+i|b⟩)/√2`.
pub fn standard_projector_set() -> Vec<Projector> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(9);
    for k in 0..3 {
        let mut c = [zero; 3];
        c[k] = Complex64::from(1.0);
        out.push(Projector { label: format!("e{k}"), coeffs: c });
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for (tag, phase) in [("s", Complex64::from(1.0)), ("i", Complex64::i())] {
            let mut c = [zero; 3];
            c[a] = Complex64::from(FRAC_1_SQRT_2);
            c[b] = phase * FRAC_1_SQRT_2;
            out.push(Projector { label: format!("{tag}{a}{b}"), coeffs: c });
        }
    }
    out
}

/// One coincidence setting, projector `a` on photon A and `b` on photon B.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub index: usize,
    pub a: Projector,
    pub b: Projector,
}

impl Setting {
    pub fn vector(&self) -> SVector<Complex64, 9> {
        self.a.vector().kronecker(&self.b.vector())
    }

    /// `⟨ψ_a ψ_b| ρ |ψ_a ψ_b⟩`.
    pub fn probability(&self, rho: &Matrix9) -> f64 {
        let v = self.vector();
        (v.adjoint() * rho * v)[(0, 0)].re
    }
}

/// All ordered pairs of a single-photon set, index `9·a + b` for the standard set.
pub fn settings(projectors: &[Projector]) -> Vec<Setting> {
    let mut out = Vec::with_capacity(projectors.len() * projectors.len());
    for a in projectors {
        for b in projectors {
            out.push(Setting { index: out.len(), a: a.clone(), b: b.clone() });
        }
    }
    out
}

pub fn standard_settings() -> Vec<Setting> {
    settings(&standard_projector_set())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_index: usize,
    #[serde(rename = "projA_spec")]
    pub proj_a: String,
    #[serde(rename = "projB_spec")]
    pub proj_b: String,
    /// Coincidences per second.
    pub expected_rate: f64,
    pub counts: u64,
    #[serde(skip)]
    pub integration: f64,
    pub seed: u64,
}

fn poisson_draw(mean: f64, seed: u64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(&mut rng_from_seed(seed)) as u64
}

/// Expected rates `flux · p_s` and Poisson counts over `integration` seconds,
/// one derived seed per setting.
pub fn simulate_counts(
    rho: &BipartiteDensityMatrix,
    settings: &[Setting],
    flux: f64,
    integration: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if !(flux.is_finite() && flux > 0.0) {
        return Err(Error::param("flux", format!("must be positive, got {flux}")));
    }
    if !(integration.is_finite() && integration > 0.0) {
        return Err(Error::param("integration", format!("must be positive, got {integration}")));
    }
    settings
        .iter()
        .map(|s| {
            let p = s.probability(rho.matrix());
            if p < -1e-12 {
                return Err(Error::Unphysical(format!(
                    "setting {} has negative probability {p:e}",
                    s.index
                )));
            }
            let rate = flux * p.max(0.0);
            let record_seed = derive_seed(seed, &[s.index as u64]);
            Ok(CountRecord {
                setting_index: s.index,
                proj_a: s.a.label.clone(),
                proj_b: s.b.label.clone(),
                expected_rate: rate,
                counts: poisson_draw(rate * integration, record_seed),
                integration,
                seed: record_seed,
            })
        })
        .collect()
}

pub fn write_counts_csv(path: &Path, records: &[CountRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Hermitian operator basis: `E_kk`, `E_jk + E_kj`, `i(E_jk − E_kj)`.
fn hermitian_basis() -> Vec<Matrix9> {
    let mut out = Vec::with_capacity(PARAMS);
    for j in 0..9 {
        for k in j..9 {
            let mut m = Matrix9::zeros();
            if j == k {
                m[(j, j)] = Complex64::from(1.0);
                out.push(m);
            } else {
                m[(j, k)] = Complex64::from(1.0);
                m[(k, j)] = Complex64::from(1.0);
                out.push(m);
                let mut n = Matrix9::zeros();
                n[(j, k)] = -Complex64::i();
                n[(k, j)] = Complex64::i();
                out.push(n);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionMethod {
    /// Linear inversion followed by physical projection.
    Linear,
    /// Linear estimate refined by `RρR` likelihood iterations.
    MaximumLikelihood,
}

/// Precomputed inverse of the measurement map for a fixed setting list.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    settings: Vec<Setting>,
    basis: Vec<Matrix9>,
    pinv: DMatrix<f64>,
    /// `Σ_s |ψ_s⟩⟨ψ_s|` and its inverse, used by the likelihood iterations.
    gram_inv: Matrix9,
    pub method: ReconstructionMethod,
    pub ml_iterations: usize,
}

impl Reconstructor {
    pub fn new(settings: Vec<Setting>) -> Result<Self> {
        let basis = hermitian_basis();
        let rows = settings.len();
        let map = DMatrix::from_fn(rows, PARAMS, |s, k| settings[s].probability(&basis[k]));
        let svd = map.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&v| v > 1e-10 * smax).count();
        if rank < PARAMS {
            return Err(Error::RankDeficient { rank, required: PARAMS });
        }
        let pinv = svd
            .pseudo_inverse(1e-10 * smax)
            .map_err(|e| Error::InvariantViolation(e.to_string()))?;
        let gram = settings
            .iter()
            .fold(Matrix9::zeros(), |acc, s| {
                let v = s.vector();
                acc + v * v.adjoint()
            });
        let gram_inv = gram
            .try_inverse()
            .ok_or(Error::RankDeficient { rank: 0, required: 9 })?;
        Ok(Self {
            settings,
            basis,
            pinv,
            gram_inv,
            method: ReconstructionMethod::Linear,
            ml_iterations: 5000,
        })
    }

    pub fn standard() -> Self {
        Self::new(standard_settings()).expect("standard settings are informationally complete")
    }

    pub fn with_method(mut self, method: ReconstructionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    /// Least-squares operator reproducing `data` (counts or probabilities),
    /// without trace normalization. Hermitian by construction, not
    /// necessarily PSD; its trace estimates the total intensity.
    pub fn linear_estimate(&self, data: &[f64]) -> Result<Matrix9> {
        if data.len() != self.settings.len() {
            return Err(Error::param(
                "counts",
                format!("expected {} settings, got {}", self.settings.len(), data.len()),
            ));
        }
        let x = &self.pinv * DVector::from_column_slice(data);
        Ok(self
            .basis
            .iter()
            .zip(x.iter())
            .fold(Matrix9::zeros(), |acc, (b, &c)| acc + b * Complex64::from(c)))
    }

    /// [`Self::linear_estimate`] scaled to unit trace.
    pub fn linear_inversion(&self, data: &[f64]) -> Result<Matrix9> {
        let m = self.linear_estimate(data)?;
        let tr = m.trace().re;
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::Unphysical(format!("linear estimate has trace {tr}")));
        }
        Ok(m.unscale(tr))
    }

    fn data_from_records(&self, records: &[CountRecord]) -> Result<Vec<f64>> {
        if records.len() != self.settings.len() {
            return Err(Error::param("counts", "one record per setting is required"));
        }
        let mut data = vec![0.0; self.settings.len()];
        for r in records {
            let slot = data
                .get_mut(r.setting_index)
                .ok_or_else(|| Error::param("counts", format!("unknown setting {}", r.setting_index)))?;
            *slot = r.counts as f64;
        }
        Ok(data)
    }

    pub fn reconstruct(&self, records: &[CountRecord], basis_ell: u32) -> Result<BipartiteDensityMatrix> {
        self.reconstruct_from_data(&self.data_from_records(records)?, basis_ell)
    }

    /// Reconstruction plus the trace of the linear estimate, i.e. the total
    /// coincidence yield in units of `flux × integration`-weighted probability.
    pub fn reconstruct_with_yield(
        &self,
        records: &[CountRecord],
        basis_ell: u32,
    ) -> Result<(BipartiteDensityMatrix, f64)> {
        let data = self.data_from_records(records)?;
        let yield_ = self.linear_estimate(&data)?.trace().re;
        Ok((self.reconstruct_from_data(&data, basis_ell)?, yield_))
    }

    pub fn reconstruct_from_data(&self, data: &[f64], basis_ell: u32) -> Result<BipartiteDensityMatrix> {
        let linear = project_to_physical(&self.linear_inversion(data)?);
        let rho = match self.method {
            ReconstructionMethod::Linear => linear,
            ReconstructionMethod::MaximumLikelihood => self.likelihood_refine(linear, data),
        };
        BipartiteDensityMatrix::new(hermitize(&rho), basis_ell)
    }

    /// `RρR` iterations `ρ ← G⁻¹RρRG⁻¹ / tr(·)`.
    fn likelihood_refine(&self, start: Matrix9, data: &[f64]) -> Matrix9 {
        // mix in a little of the identity so no setting starts at p = 0
        let mut rho = start * Complex64::from(0.99) + Matrix9::identity() * Complex64::from(0.01 / 9.0);
        for _ in 0..self.ml_iterations {
            let mut r = Matrix9::zeros();
            for (s, &n) in self.settings.iter().zip(data) {
                let p = s.probability(&rho);
                if n > 0.0 && p > 0.0 {
                    let v = s.vector();
                    r += v * v.adjoint() * Complex64::from(n / p);
                }
            }
            let next = self.gram_inv * r * rho * r * self.gram_inv;
            let next = hermitize(&next);
            let next = next.unscale(next.trace().re);
            let change = (next - rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
            rho = next;
            if change < 1e-12 {
                break;
            }
        }
        rho
    }
}

fn hermitize(m: &Matrix9) -> Matrix9 {
    (m + m.adjoint()).unscale(2.0)
}

/// Closest density matrix in the 2-norm: eigenvalues are clipped at zero and
/// the deficit is spread uniformly over the remaining ones, repeatedly, until
/// all are non-negative with unit sum.
pub fn project_to_physical(m: &Matrix9) -> Matrix9 {
    let h = hermitize(m);
    let h = h.unscale(h.trace().re);
    let eig = SymmetricEigen::new(h);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return h;
    }
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut acc = 0.0;
    let mut keep = 9;
    while keep > 0 && lam[keep - 1] + acc / (keep as f64) < 0.0 {
        acc += lam[keep - 1];
        lam[keep - 1] = 0.0;
        keep -= 1;
    }
    for l in lam.iter_mut().take(keep) {
        *l += acc / keep as f64;
    }
    let mut out = Matrix9::zeros();
    for (&i, &l) in order.iter().zip(&lam) {
        if l > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += v * v.adjoint() * Complex64::from(l);
        }
    }
    hermitize(&out)
}

/// Negativity of a reconstruction with a parametric-bootstrap error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub value: f64,
    pub std_dev: f64,
    pub replicas: usize,
}

/// Draws `replicas` Poisson count sets from the expected rates implied by
/// `rho`, reconstructs each and returns the spread of the statistic.
pub fn parametric_bootstrap(
    reconstructor: &Reconstructor,
    rho: &BipartiteDensityMatrix,
    flux: f64,
    integration: f64,
    replicas: usize,
    seed: u64,
    statistic: impl Fn(&BipartiteDensityMatrix) -> f64 + Sync,
) -> Result<BootstrapEstimate> {
    if replicas < 2 {
        return Err(Error::param("replicas", "bootstrap needs at least two replicas"));
    }
    let values: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|b| {
            let counts = simulate_counts(rho, reconstructor.settings(), flux, integration, derive_seed(seed, &[b as u64]))?;
            Ok(statistic(&reconstructor.reconstruct(&counts, rho.basis_ell())?))
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / replicas as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64;
    Ok(BootstrapEstimate { value: statistic(rho), std_dev: var.sqrt(), replicas })
}

/// Negativity with bootstrap error for a single simulated tomography run.
pub fn tomography_negativity(
    reconstructor: &Reconstructor,
    truth: &BipartiteDensityMatrix,
    flux: f64,
    integration: f64,
    replicas: usize,
    seed: u64,
) -> Result<(BipartiteDensityMatrix, BootstrapEstimate)> {
    let counts = simulate_counts(truth, reconstructor.settings(), flux, integration, derive_seed(seed, &[0]))?;
    let rho = reconstructor.reconstruct(&counts, truth.basis_ell())?;
    let stat = |r: &BipartiteDensityMatrix| negativity(r).map(|n| n.value).unwrap_or(f64::NAN);
    let boot = parametric_bootstrap(reconstructor, &rho, flux, integration, replicas, derive_seed(seed, &[1]), stat)?;
    Ok((rho, boot))
}
