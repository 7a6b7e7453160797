//! Channel tracking and prediction for IRS-aided wireless links.
//!
//! A single-antenna access point communicates with a single-antenna user
//! through an intelligent reflecting surface with `N` passive elements.
//! The direct and cascaded channels evolve as stationary Gauss-Markov
//! processes; pilots are observed through per-slot reflection patterns.
//! This crate simulates that system and implements the two-stage tracking
//! and prediction pipeline on top of it:
//!
//! - [`numerics`]: dense complex vectors/matrices, seeded sampling, DFT
//!   matrix construction, Hermitian positive-definite solves.
//! - [`channel`]: physical channel generation and Gauss-Markov evolution,
//!   plus the state-space matrices of the equivalent channel.
//! - [`measurement`]: reference/measurement matrices and noisy pilot
//!   observations.
//! - [`tracker`]: Kalman-filter tracking for the static-IRS special case,
//!   the mean-removal wrapper for Rician links, and the generalized filter
//!   with Gaussian approximations of the composite (product-Gaussian)
//!   process noise.
//! - [`predictor`]: a dual real/imaginary LSTM network that forecasts
//!   future pilot observations so the filter can keep running without
//!   pilots being sent.
//! - [`harness`]: the two-stage protocol runner, NMSE/ANMSE metrics,
//!   overhead accounting, Monte-Carlo experiments and CSV output.

pub mod channel;
pub mod error;
pub mod harness;
pub mod measurement;
pub mod numerics;
pub mod predictor;
pub mod tracker;

pub use error::{CtpError, Result};
