//! Mean estimation of a Gaussian from adaptive one-bit messages.
//!
//! The crate implements two adaptive one-bit schemes (sign-SGD with iterate
//! averaging, and a one-step-optimal Bayesian threshold scheme), an
//! unconstrained empirical-mean baseline, the lower and upper bounds that
//! bracket their risk, executable checks of the Fisher-information bounds,
//! and a deterministic Monte Carlo harness that reports n·MSE curves.

pub mod error;
pub mod math;
pub mod bounds;
pub mod checks;
pub mod config;
pub mod encoders;
pub mod posterior;
pub mod sim;

pub use error::{Error, Result};
