//! Simulation of two-qutrit orbital-angular-momentum entanglement decay when
//! one photon of a down-converted pair passes through a single Kolmogorov
//! phase screen.
//!
//! The crate computes the output 9×9 density matrix two ways:
//!
//! - analytically, by coefficient extraction from the density-matrix
//!   generating function of the quadratic structure-function model
//!   ([`channel::analytic_density_matrix`]);
//! - by Monte Carlo over synthesized phase screens, either random tilts
//!   (which realize the quadratic model exactly and act as an oracle) or
//!   FFT/subharmonic Kolmogorov screens ([`channel::monte_carlo_density_matrix`]).
//!
//! Entanglement is quantified with the negativity ([`entanglement`]), the
//! measurement chain is emulated with simulated qutrit tomography
//! ([`tomography`]), and [`experiment`] drives the full turbulence sweep.

pub mod channel;
pub mod entanglement;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod lgmodes;
pub mod rng;
pub mod spdc;
pub mod tomography;
pub mod turbulence;

pub use channel::{BipartiteDensityMatrix, ChannelParams, StrengthConvention};
pub use error::{Error, Result};
pub use grid::GridSpec;
pub use lgmodes::QutritBasis;
