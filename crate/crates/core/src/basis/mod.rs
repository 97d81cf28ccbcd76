//! Regressor bases: the diurnal Fourier curve, the first-order low-pass
//! filter for ambient temperature, and clamped B-splines.

mod diurnal;
mod lowpass;
mod spline;

pub use diurnal::{diurnal_row, DiurnalBasis, DEFAULT_HARMONICS};
pub use lowpass::{lowpass_apply, LowPassFilter};
pub use spline::{quantile, quantile_knots, spline_row, SplineBasis};
