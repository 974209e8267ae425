//! Photon-level simulation and analysis of a fiber-cavity quantum memory
//! whose write and read operations are intracavity Bragg-scattering
//! four-wave-mixing frequency translations.
//!
//! Modules, bottom up:
//!
//! * [`spectral`]: wavelengths, the phase-matching frequency map, coating
//!   curves, spectral intensity profiles.
//! * [`cavity`]: round-trip time, per-round-trip survival, ring-down
//!   lifetime and its inversion.
//! * [`bsfwm`]: conversion angle and efficiency, the walk-off delay profile,
//!   per-photon translation.
//! * [`detection`]: detection chain, collection windows, Raman noise model.
//! * [`montecarlo`]: trial-by-trial simulation producing round-trip
//!   histograms, plus delay and power scans.
//! * [`analysis`]: ring-down fits, efficiency extraction, fidelity, scan fits.
//! * [`multiplex`]: temporal multiplexing of a heralded source.
//! * [`config`]: TOML scenario files.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bsfwm;
pub mod cavity;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod montecarlo;
pub mod multiplex;
mod optimize;
pub mod spectral;

pub use error::{Error, Result};
