//! Reduced-rank channel prediction and Grassmannian limited feedback for
//! SISO interference alignment over time-variant frequency-selective
//! channels.
//!
//! The pipeline per Monte-Carlo trial is: [`channel`] draws all K² links,
//! each receiver fits Slepian coefficients ([`dps`], [`predictor`]) to its
//! pilots, quantizes them ([`feedback`]), and the transmitters run closed-form
//! alignment on the predicted channels ([`ia`]). [`analysis`] evaluates the
//! rate-loss bound that drives the subspace-dimension choice, [`baseline`]
//! holds the non-predictive reference and [`harness`] orchestrates trials.

pub mod analysis;
pub mod baseline;
pub mod channel;
pub mod config;
pub mod dps;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod ia;
pub mod math;
pub mod predictor;

pub use config::{DimensionMode, DopplerSpectrum, QuantizerMode, SimConfig};
pub use error::{Error, Result};
