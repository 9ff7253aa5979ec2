//! The single-phase-screen turbulence channel acting on photon A.
//!
//! Two independent routes produce the output density matrix:
//! [`analytic_density_matrix`] extracts coefficients from the closed-form
//! generating function of the quadratic structure-function model, and
//! [`monte_carlo_density_matrix`] averages per-screen coincidence amplitudes
//! over an ensemble of phase screens. With random-tilt screens the second
//! route realizes the quadratic model exactly; with Kolmogorov screens it
//! realizes the 5/3 model.

pub(crate) mod density;
mod generating;
mod monte_carlo;

pub use density::{BipartiteDensityMatrix, DensityMatrixDocument, Matrix9, MatrixMeta, Model};
pub use generating::{analytic_density_matrix, generating_coefficient};
pub use monte_carlo::{
    monte_carlo_density_matrix, monte_carlo_with_kernel, screen_coincidence_amplitudes,
    CoincidenceAmplitudes, OverlapKernel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::turbulence::STRUCTURE_COEFF;

/// How a scintillation strength `W` maps to a Fried parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrengthConvention {
    /// `W = w0 / r0` (basis waist).
    #[serde(rename = "w0_over_r0")]
    W0OverR0,
    /// `W = w_p / r0` (effective pump width).
    #[serde(rename = "wp_over_r0")]
    WpOverR0,
}

impl StrengthConvention {
    pub fn tag(self) -> &'static str {
        match self {
            StrengthConvention::W0OverR0 => "w0_over_r0",
            StrengthConvention::WpOverR0 => "wp_over_r0",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "w0_over_r0" | "w0" => Ok(StrengthConvention::W0OverR0),
            "wp_over_r0" | "wp" => Ok(StrengthConvention::WpOverR0),
            other => Err(Error::param(
                "w_convention",
                format!("expected w0_over_r0 or wp_over_r0, got `{other}`"),
            )),
        }
    }

    /// `w_p / r0` for a strength `w` at the given `α = w0²/w_p²`.
    pub fn wp_over_r0(self, w: f64, alpha: f64) -> f64 {
        match self {
            StrengthConvention::W0OverR0 => w / alpha.sqrt(),
            StrengthConvention::WpOverR0 => w,
        }
    }

    /// `w0 / r0` for a strength `w` at the given `α`.
    pub fn w0_over_r0(self, w: f64, alpha: f64) -> f64 {
        self.wp_over_r0(w, alpha) * alpha.sqrt()
    }
}

/// Dimensionless inputs of the channel generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// `w0² / w_p²`.
    pub alpha: f64,
    /// `6.88 (w_p / r0)^{5/3}`.
    pub xi: f64,
}

impl ChannelParams {
    pub fn new(alpha: f64, xi: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::param("xi", format!("must be non-negative, got {xi}")));
        }
        Ok(Self { alpha, xi })
    }

    /// From the turbulence parameter of the closed-form negativity expressions,
    /// `η = α ξ / (2 + α)`.
    pub fn from_eta(alpha: f64, eta: f64) -> Result<Self> {
        Self::new(alpha, eta * (2.0 + alpha) / alpha)
    }

    pub fn from_strength(alpha: f64, w: f64, convention: StrengthConvention) -> Result<Self> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::param("w", format!("must be non-negative, got {w}")));
        }
        Self::new(alpha, xi_from_wp_over_r0(convention.wp_over_r0(w, alpha)))
    }

    pub fn m0(&self) -> f64 {
        1.0 / (2.0 * (self.alpha + 2.0))
    }

    pub fn m1(&self) -> f64 {
        1.0 / (2.0 * (self.alpha + 2.0 + self.alpha * self.xi))
    }

    pub fn eta(&self) -> f64 {
        self.alpha * self.xi / (2.0 + self.alpha)
    }
}

/// `ξ = 6.88 (w_p/r0)^{5/3}`.
pub fn xi_from_wp_over_r0(ratio: f64) -> f64 {
    STRUCTURE_COEFF * ratio.powf(5.0 / 3.0)
}
