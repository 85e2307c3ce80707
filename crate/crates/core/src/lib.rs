//! Active optical clock laser driven by atoms that cross the cavity mode twice,
//! with a field-free drift between the two crossings (Ramsey separated zones).
//!
//! The crate is organised in layers:
//!
//! * [`model`] — parameter containers, the Ca-40 preset and the regime checker.
//! * [`bloch`] — exact two-level propagation through pulse / drift / pulse.
//! * [`analytic`] — Ramsey coefficients, steady state, phase-noise spectrum
//!   and linewidth formulas.
//! * [`sim`] — stochastic microscopic simulation (c-number Bloch vectors for
//!   every atom plus a classical cavity field).
//! * [`spectral`] — phase unwrapping, phase-diffusion fits and Lorentzian fits.
//! * [`cli`] — configuration files, CSV/manifest writers and the command runners
//!   used by the `ramsey-laser` binary.

pub mod analytic;
pub mod bloch;
pub mod cli;
pub mod error;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod sum;

pub use error::{Error, Result};

/// Converts an angular rate in rad/s into Hz.
pub fn radps_to_hz(x: f64) -> f64 {
    x / (2.0 * std::f64::consts::PI)
}
