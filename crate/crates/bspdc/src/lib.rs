//! Desk-scale model of a counterpropagating-SPDC polarization-entanglement
//! source: quasi-phase-matched spectral curves, Hong-Ou-Mandel interference,
//! coincidence statistics, CHSH Bell tests and maximum-likelihood quantum
//! state tomography.
//!
//! The crate is organized around the measurement pipeline of such a source:
//!
//! - [`polarization`]: Jones calculus for the waveplates, PBS ports and
//!   projectors of the analysis optics.
//! - [`quantum`]: two-qubit polarization kets and density matrices, the
//!   entangled-state family, fidelity and purity.
//! - [`dispersion`] / [`spectrum`]: refractive-index models, backward
//!   quasi-phase-matching mismatch, sinc² tuning curves, biphoton spectra
//!   and étalon filters.
//! - [`hom`]: Hong-Ou-Mandel dip computation, triangle fits, visibility.
//! - [`counts`]: Poissonian coincidence-count synthesis, fringe fitting,
//!   accidental subtraction, spectral brightness.
//! - [`tomography`]: 16-setting linear inversion and physicality-constrained
//!   maximum-likelihood reconstruction with Monte-Carlo error bars.
//! - [`chsh`]: correlation coefficients, the S value and violation
//!   significance.
//! - [`config`] / [`cli`]: run configuration and the command-line front end.
//!
//! Conventions used throughout (documented once, here):
//!
//! - H and V label polarizations along the crystal y and z axes.
//! - Two-qubit basis ordering is {HH, HV, VH, VV} with the right-propagating
//!   photon as the first tensor factor (R ⊗ L).
//! - Angles are radians internally; the CLI and counts files use degrees.
//! - States are compared modulo global phase.

pub mod chsh;
pub mod cli;
pub mod config;
pub mod counts;
pub mod dispersion;
pub mod hom;
pub mod polarization;
pub mod quantum;
pub mod spectrum;
pub mod tomography;

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Crate-wide error type. The CLI maps each variant to a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or inconsistent input data (exit code 3).
    #[error("data error: {0}")]
    Data(String),
    /// Numerical failure: no root bracket, non-convergent fit, etc. (exit code 4).
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI contract: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
