//! Koopman matrix approximation from time-series data.
//!
//! Three fitting routes share one pipeline: classical EDMD over an explicit
//! radial-basis dictionary, EDMD over the internal states of an echo state
//! network, and a dictionary-learning scheme that trains the network's
//! linear readout by alternating least squares. On top of the fitted
//! Koopman matrices sit reconstruction, prediction and spectral analysis,
//! plus a small experiment harness with benchmark systems.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod io;
pub mod koopman;
pub mod linalg;
pub mod reservoir;

pub use error::{Error, Result};
