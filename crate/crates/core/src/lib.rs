//! Event-level simulator of a delayed-choice quantum eraser.
//!
//! Polarization-entangled photon pairs are described by a 4×4 density matrix
//! (signal ⊗ idler, basis `HH, HV, VH, VV`). Optical elements act on it through
//! Jones matrices, measurement outcomes are sampled with the Born rule, and the
//! resulting photons are propagated to four timestamped detector streams that a
//! coincidence counter turns into count tables.
//!
//! Layering, bottom to top:
//!
//! * [`quantum_state`] and [`optics`]: exact polarization algebra.
//! * [`photon_source`]: state preparation and Poisson pair emission.
//! * [`event_timeline`]: outcome sampling, path delays and detectors.
//! * [`coincidence`]: window matching and count tables.
//! * [`experiment`]: fringe scans, delay comparison, CHSH, beam block,
//!   joint rotations and wave-plate overshoot.
//! * [`analysis`]: fringe fitting, visibility, distinguishability and scan
//!   comparison statistics.
//! * [`config`] and [`io`]: configuration files and CSV interchange.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coincidence;
pub mod config;
pub mod error;
pub mod event_timeline;
pub mod experiment;
pub mod io;
pub mod optics;
pub mod photon_source;
pub mod quantum_state;
pub mod seeding;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;
/// 2×2 complex matrix on one photon's polarization.
pub type Matrix2c = nalgebra::Matrix2<Complex>;
/// 4×4 complex matrix on the signal ⊗ idler polarization space.
pub type Matrix4c = nalgebra::Matrix4<Complex>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
