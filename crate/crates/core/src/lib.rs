//! Adaptive hour-ahead electrical load forecasting for refrigeration
//! systems.
//!
//! One recursive least squares model per forecast horizon (1 to 42 hours)
//! combines a Fourier diurnal curve, regime switching between opening and
//! closing hours, and low-pass filtered ambient temperature spliced from
//! local observations and weather forecasts. An offline spline stage
//! captures the nonlinear temperature response, and an autoregressive noise
//! model cleans up the one-step residuals.

pub mod basis;
pub mod calendar;
pub mod cli;
pub mod error;
pub mod eval;
pub mod exec;
pub mod forecaster;
pub mod kv;
mod linalg;
pub mod optimize;
pub mod repair;
pub mod rls;
pub mod series;
pub mod synth;
pub mod weather;

pub use error::{Error, Result};
