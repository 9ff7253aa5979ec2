use std::fs;
use std::path::Path;

use nalgebra::{SMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::StrengthConvention;
use crate::error::{Error, Result};

pub type Matrix9 = SMatrix<Complex64, 9, 9>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_FLOOR: f64 = -1e-10;

/// Two-qutrit density matrix, rows and columns indexed `3·i_A + i_B` with
/// `i ∈ {0,1,2} ↔ {-ℓ, 0, +ℓ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteDensityMatrix {
    rho: Matrix9,
    basis_ell: u32,
}

pub(crate) fn hermitian_deviation(m: &Matrix9) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..9 {
        for c in r..9 {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitian_eigenvalues(m: &Matrix9) -> [f64; 9] {
    let eig = SymmetricEigen::new(*m);
    let mut out = [0.0; 9];
    for (o, v) in out.iter_mut().zip(eig.eigenvalues.iter()) {
        *o = *v;
    }
    out.sort_by(f64::total_cmp);
    out
}

impl BipartiteDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix9, basis_ell: u32) -> Result<Self> {
        let dev = hermitian_deviation(&rho);
        if dev > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Unphysical(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&rho)[0];
        if min < PSD_FLOOR {
            return Err(Error::Unphysical(format!("eigenvalue {min:.3e} below floor")));
        }
        Ok(Self { rho, basis_ell })
    }

    /// Divides by the trace, then validates.
    pub fn from_unnormalized(m: Matrix9, basis_ell: u32) -> Result<Self> {
        let tr = m.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Unphysical(format!("cannot normalize trace {tr}")));
        }
        Self::new(m.unscale(tr), basis_ell)
    }

    pub fn matrix(&self) -> &Matrix9 {
        &self.rho
    }

    pub fn basis_ell(&self) -> u32 {
        self.basis_ell
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.rho[(row, col)]
    }

    /// `|⟨0,0|ρ|0,0⟩|`, the centre of the 9×9 array.
    pub fn central_element(&self) -> f64 {
        self.rho[(4, 4)].norm()
    }

    pub fn eigenvalues(&self) -> [f64; 9] {
        hermitian_eigenvalues(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        0.5 * hermitian_eigenvalues(&(self.rho - other.rho))
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        (self.rho - other.rho).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_document(&self, meta: &MatrixMeta) -> DensityMatrixDocument {
        let mut entries = Vec::with_capacity(81);
        for r in 0..9 {
            for c in 0..9 {
                let z = self.rho[(r, c)];
                entries.push((r, c, z.re, z.im));
            }
        }
        DensityMatrixDocument {
            basis_ell: self.basis_ell,
            alpha: meta.alpha,
            xi: meta.xi,
            w: meta.w,
            w_convention: meta.w_convention,
            model: meta.model,
            entries,
        }
    }

    pub fn to_json(&self, meta: &MatrixMeta) -> String {
        serde_json::to_string_pretty(&self.to_document(meta)).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<(Self, MatrixMeta)> {
        let doc: DensityMatrixDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.into_matrix()
    }

    /// Little-endian layout mirroring the screen files: header
    /// `dim: u64, basis_ell: u64, alpha: f64, xi: f64`, then 81 row-major
    /// `(re, im)` pairs of `f64`.
    pub fn to_bytes(&self, alpha: f64, xi: f64) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 81 * 16);
        out.extend_from_slice(&9u64.to_le_bytes());
        out.extend_from_slice(&u64::from(self.basis_ell).to_le_bytes());
        out.extend_from_slice(&alpha.to_le_bytes());
        out.extend_from_slice(&xi.to_le_bytes());
        for r in 0..9 {
            for c in 0..9 {
                out.extend_from_slice(&self.rho[(r, c)].re.to_le_bytes());
                out.extend_from_slice(&self.rho[(r, c)].im.to_le_bytes());
            }
        }
        out
    }

    /// Returns the matrix with the stored `(alpha, xi)` header values.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, f64, f64)> {
        if bytes.len() != 32 + 81 * 16 {
            return Err(Error::Format(format!(
                "density-matrix file must be {} bytes, got {}",
                32 + 81 * 16,
                bytes.len()
            )));
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
        if u64::from_le_bytes(word(0)) != 9 {
            return Err(Error::Format("dimension field must be 9".into()));
        }
        let ell = u32::try_from(u64::from_le_bytes(word(1)))
            .map_err(|_| Error::Format("basis ℓ out of range".into()))?;
        let alpha = f64::from_le_bytes(word(2));
        let xi = f64::from_le_bytes(word(3));
        let mut rho = Matrix9::zeros();
        for k in 0..81 {
            rho[(k / 9, k % 9)] = Complex64::new(
                f64::from_le_bytes(word(4 + 2 * k)),
                f64::from_le_bytes(word(5 + 2 * k)),
            );
        }
        Ok((Self::new(rho, ell)?, alpha, xi))
    }

    pub fn write_json(&self, path: &Path, meta: &MatrixMeta) -> Result<()> {
        fs::write(path, self.to_json(meta)).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<(Self, MatrixMeta)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Which turbulence model produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Analytic generating function (quadratic structure function).
    QuadraticModel,
    /// Monte Carlo over random tilts (quadratic structure function).
    TiltMonteCarlo,
    /// Monte Carlo over Kolmogorov screens (5/3 structure function).
    KolmogorovMonteCarlo,
    /// Reconstructed from simulated counts.
    Tomography,
    NoTurbulence,
}

impl Model {
    pub fn label(self) -> &'static str {
        match self {
            Model::QuadraticModel => "quadratic model",
            Model::TiltMonteCarlo => "quadratic model (tilt Monte Carlo)",
            Model::KolmogorovMonteCarlo => "5/3 model",
            Model::Tomography => "tomography",
            Model::NoTurbulence => "no turbulence",
        }
    }
}

/// Labels attached to a serialized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub alpha: f64,
    pub xi: Option<f64>,
    pub w: Option<f64>,
    pub w_convention: Option<StrengthConvention>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixDocument {
    pub basis_ell: u32,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_convention: Option<StrengthConvention>,
    pub model: Model,
    /// `[row, col, re, im]`.
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl DensityMatrixDocument {
    pub fn into_matrix(self) -> Result<(BipartiteDensityMatrix, MatrixMeta)> {
        if self.entries.len() != 81 {
            return Err(Error::Format(format!("expected 81 entries, got {}", self.entries.len())));
        }
        let mut rho = Matrix9::zeros();
        let mut seen = [false; 81];
        for &(r, c, re, im) in &self.entries {
            if r >= 9 || c >= 9 || seen[9 * r + c] {
                return Err(Error::Format(format!("bad or duplicate entry ({r}, {c})")));
            }
            seen[9 * r + c] = true;
            rho[(r, c)] = Complex64::new(re, im);
        }
        let meta = MatrixMeta {
            alpha: self.alpha,
            xi: self.xi,
            w: self.w,
            w_convention: self.w_convention,
            model: self.model,
        };
        Ok((BipartiteDensityMatrix::new(rho, self.basis_ell)?, meta))
    }
}
