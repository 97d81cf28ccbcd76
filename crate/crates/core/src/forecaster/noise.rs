//! Autoregressive model on the one-step residuals, lags 1, 2 and 24.

use crate::error::{Error, Result};
use crate::rls::RlsState;
use crate::series::HourlySeries;

pub const DEFAULT_NOISE_LAMBDA: f64 = 0.997;
pub const NOISE_LAGS: [usize; 3] = [1, 2, 24];
const MIN_SAMPLES: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    state: RlsState,
}

impl NoiseModel {
    pub fn new(lambda: f64) -> Result<Self> {
        Ok(Self {
            state: RlsState::new(NOISE_LAGS.len(), lambda)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.state.lambda()
    }

    /// Current `[α₁, α₂, α₂₄]`.
    pub fn coefficients(&self) -> &[f64] {
        self.state.theta()
    }

    pub fn state(&self) -> &RlsState {
        &self.state
    }
}

/// Corrected residuals and the fitted model. The output series starts 24
/// hours after the input: `ε_noise[j] = ε[j] − ε̂[j]`, where `ε̂[j]` uses
/// coefficients fitted on data before `j` only. Slots whose lags or value are
/// missing stay missing and skip the update.
pub fn noise_fit_apply(residuals_1step: &HourlySeries, lambda: f64) -> Result<(HourlySeries, NoiseModel)> {
    let e = residuals_1step.values();
    let observed = e.iter().filter(|v| !v.is_nan()).count();
    if e.len() < MIN_SAMPLES || observed < MIN_SAMPLES {
        return Err(Error::Length {
            needed: MIN_SAMPLES,
            got: observed,
        });
    }
    let mut model = NoiseModel::new(lambda)?;
    let max_lag = NOISE_LAGS[NOISE_LAGS.len() - 1];
    let mut out = Vec::with_capacity(e.len() - max_lag);
    let mut x = [0.0; NOISE_LAGS.len()];
    for j in max_lag..e.len() {
        for (slot, lag) in x.iter_mut().zip(NOISE_LAGS) {
            *slot = e[j - lag];
        }
        if e[j].is_nan() || x.iter().any(|v| v.is_nan()) {
            out.push(f64::NAN);
            continue;
        }
        let predicted = model.state.predict(&x)?;
        out.push(e[j] - predicted);
        model.state.update(&x, e[j])?;
    }
    let series = HourlySeries::new(residuals_1step.timestamp(max_lag), out, residuals_1step.unit())?;
    Ok((series, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(v: Vec<f64>) -> HourlySeries {
        HourlySeries::new(Utc.with_ymd_and_hms(2012, 5, 1, 0, 0, 0).unwrap(), v, "kW").unwrap()
    }

    fn ar(n: usize, a: [f64; 3], seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut e = vec![0.0; n + 200];
        for j in 24..e.len() {
            e[j] = a[0] * e[j - 1] + a[1] * e[j - 2] + a[2] * e[j - 24] + normal.sample(&mut rng);
        }
        e.split_off(200)
    }

    fn rms(v: &[f64]) -> f64 {
        let v: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn white_noise_gives_small_coefficients() {
        let e = ar(1000, [0.0; 3], 11);
        let (_, m) = noise_fit_apply(&series(e), DEFAULT_NOISE_LAMBDA).unwrap();
        for c in m.coefficients() {
            assert!(c.abs() < 0.1, "{c}");
        }
    }

    #[test]
    fn recovers_planted_ar() {
        let truth = [0.5, 0.2, 0.15];
        let e = ar(2000, truth, 5);
        let (_, m) = noise_fit_apply(&series(e), 1.0).unwrap();
        for (c, t) in m.coefficients().iter().zip(truth) {
            assert!((c - t).abs() < 0.05, "{c} vs {t}");
        }
    }

    #[test]
    fn reduces_rmse_on_correlated_residuals() {
        let e = ar(2000, [0.6, 0.1, 0.2], 9);
        let (clean, _) = noise_fit_apply(&series(e.clone()), DEFAULT_NOISE_LAMBDA).unwrap();
        assert!(rms(clean.values()) < rms(&e[24..]));
        assert_eq!(clean.len(), e.len() - 24);
    }

    #[test]
    fn short_series_rejected() {
        let err = noise_fit_apply(&series(vec![0.1; 24]), 0.997).unwrap_err();
        assert!(matches!(err, Error::Length { .. }));
    }

    #[test]
    fn first_corrections_use_no_future() {
        // The first corrected value uses the zero prior, so it equals the input.
        let e = ar(100, [0.5, 0.0, 0.0], 3);
        let (clean, _) = noise_fit_apply(&series(e.clone()), 0.997).unwrap();
        assert_eq!(clean.values()[0], e[24]);
    }
}
