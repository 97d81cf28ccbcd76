//! The three forecast models, the regime predictor, the spline first stage
//! and the residual noise model.

mod config;
mod noise;
mod regime;
mod regressor;
mod run;
mod spline_stage;

pub use config::{ModelConfig, ModelKind, SplineLabels, DEFAULT_A_TA, DEFAULT_BURN_IN_HOURS, DEFAULT_LAMBDA, HORIZONS};
pub use noise::{noise_fit_apply, NoiseModel, DEFAULT_NOISE_LAMBDA, NOISE_LAGS};
pub use regime::{fixed_regime_indicator, predict_regime, RegimeModel, RegimePredictor};
pub use regressor::build_regressor;
pub use run::{
    forecast_series, run_forecast, run_horizon, run_horizons, target_time, ForecastInputs, ForecastOutput,
    HorizonRun,
};
pub use spline_stage::{fit_spline_stage, fit_spline_stage_from_config, RegimeSpline, SplineStage, MIN_REGIME_SAMPLES};
