//! Desk-scale coherent-optical DSP lab.
//!
//! The channel is modelled the way receiver DSP perceives it: a 4-lane real
//! signal `(iX, qX, iY, qY)` passing through per-lane electrical responses,
//! IQ-plane rotations (frequency offset and phase noise), a unitary
//! polarization transform and, optionally, chromatic dispersion. On top of the
//! simulator sit data-aided LMS MIMO equalizers in four reference classes and
//! the tools to read device parameters (receiver skews, polarization state)
//! back out of converged taps.

pub mod calibration;
pub mod channel;
pub mod equalizer;
pub mod error;
pub mod modem;
pub mod parallel;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
