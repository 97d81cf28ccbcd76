//! Opening/closing regime indicators.

use crate::basis::DiurnalBasis;
use crate::calendar::{CalendarContext, Timestamp};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rls::RlsState;

use super::config::{ModelConfig, HORIZONS};

/// 1 when the local hour of `t_plus_k` lies in the configured opening
/// interval (both ends inclusive), else 0.
pub fn fixed_regime_indicator(t_plus_k: Timestamp, config: &ModelConfig, ctx: &CalendarContext) -> u8 {
    u8::from(fixed_open(ctx.time_of_day(t_plus_k), config))
}

pub(crate) fn fixed_open(tod: f64, config: &ModelConfig) -> bool {
    let hour = tod.floor() as u32;
    (config.open_hour..=config.close_hour).contains(&hour)
}

/// Regime model for one horizon: diurnal curve, intercept and a slope on
/// filtered temperature. Only the sign of the diurnal part decides the
/// regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    state: RlsState,
    diurnal_dim: usize,
}

impl RegimeModel {
    pub fn new(n_har: usize, lambda: f64) -> Result<Self> {
        let diurnal_dim = 4 * n_har;
        Ok(Self {
            state: RlsState::new(diurnal_dim + 2, lambda)?,
            diurnal_dim,
        })
    }

    pub fn state(&self) -> &RlsState {
        &self.state
    }

    pub fn diurnal_coefficients(&self) -> &[f64] {
        &self.state.theta()[..self.diurnal_dim]
    }

    /// `true` (open) when the fitted diurnal value at the row is ≥ 0.
    pub fn is_open(&self, diurnal_row: &[f64]) -> bool {
        dot(diurnal_row, self.diurnal_coefficients()) >= 0.0
    }

    /// Fills `out` with `[diurnal, 1, filtered_temp]`.
    pub fn regressor(diurnal_row: &[f64], filtered_temp: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(diurnal_row);
        out.push(1.0);
        out.push(filtered_temp);
    }

    pub fn update(&mut self, regressor: &[f64], load: f64) -> Result<()> {
        self.state.update(regressor, load)
    }
}

/// One regime model per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePredictor {
    basis: DiurnalBasis,
    models: Vec<RegimeModel>,
    a_ta: Vec<f64>,
}

impl RegimePredictor {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let models = (1..=HORIZONS)
            .map(|k| RegimeModel::new(config.n_har, config.lambda_for(k)))
            .collect::<Result<_>>()?;
        Ok(Self {
            basis: DiurnalBasis::new(config.n_har),
            models,
            a_ta: config.a_ta.clone(),
        })
    }

    pub fn model(&self, k: usize) -> &RegimeModel {
        &self.models[k - 1]
    }

    pub fn a_ta(&self, k: usize) -> f64 {
        self.a_ta[k - 1]
    }

    /// Updates horizon `k` with the regressor formed at issue time for the
    /// target whose load `load` has now been observed.
    pub fn update(&mut self, k: usize, target: Timestamp, filtered_temp: f64, load: f64, ctx: &CalendarContext) -> Result<()> {
        let mut z = Vec::with_capacity(self.basis.dim() + 2);
        RegimeModel::regressor(&self.basis.row(target, ctx), filtered_temp, &mut z);
        self.models
            .get_mut(k.wrapping_sub(1))
            .ok_or_else(|| Error::Parameter(format!("horizon {k} out of range")))?
            .update(&z, load)
    }

    pub fn predict(&self, t: Timestamp, k: usize, ctx: &CalendarContext) -> u8 {
        let target = crate::calendar::add_hours(t, k as i64);
        u8::from(self.models[k - 1].is_open(&self.basis.row(target, ctx)))
    }
}

/// Regime for target `t + k` using horizon `k`'s current coefficients. The
/// filtered temperature only matters for later updates, not for the sign.
pub fn predict_regime(predictor: &RegimePredictor, t: Timestamp, k: usize, ctx: &CalendarContext) -> u8 {
    predictor.predict(t, k, ctx)
}
