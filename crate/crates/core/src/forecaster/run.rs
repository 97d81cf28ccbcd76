//! Chronological replay of the per-horizon models.

use crate::basis::{DiurnalBasis, LowPassFilter};
use crate::calendar::{add_hours, CalendarContext, Timestamp};
use crate::error::{Error, Result};
use crate::exec::{map_range, Parallelism};
use crate::rls::RlsState;
use crate::series::HourlySeries;
use crate::weather::{HorizonMatrix, NwpSchedule};

use super::config::{ModelConfig, ModelKind, HORIZONS};
use super::regime::{fixed_open, RegimeModel};
use super::regressor::build_regressor;
use super::spline_stage::SplineStage;

/// Everything the replay needs that does not depend on λ or `a_Ta`,
/// precomputed once and shared read-only between horizons.
#[derive(Debug, Clone)]
pub struct ForecastInputs {
    start: Timestamp,
    load: Vec<f64>,
    temp: Vec<f64>,
    /// Row `i` holds the calibrated forecasts available at issue `i` for
    /// targets `i + 1 ..= i + HORIZONS`; `NaN` where none is available.
    paths: Vec<f64>,
    /// Diurnal row at every target index `0 .. len + HORIZONS`.
    diurnal: Vec<f64>,
    fixed: Vec<u8>,
    diurnal_dim: usize,
}

impl ForecastInputs {
    pub fn new(
        config: &ModelConfig,
        load: &HourlySeries,
        observed_temp: &HourlySeries,
        nwp: &HorizonMatrix,
        schedule: &NwpSchedule,
        ctx: &CalendarContext,
    ) -> Result<Self> {
        config.validate()?;
        if load.start() != observed_temp.start() || load.len() != observed_temp.len() {
            return Err(Error::Parameter("load and temperature are not co-registered".into()));
        }
        let n = load.len();
        let basis = DiurnalBasis::new(config.n_har);
        let dd = basis.dim();
        let mut diurnal = vec![0.0; (n + HORIZONS) * dd];
        let mut fixed = Vec::with_capacity(n + HORIZONS);
        for (j, row) in diurnal.chunks_mut(dd).enumerate() {
            let t = load.timestamp(j);
            let tod = ctx.time_of_day(t);
            basis.fill(tod, ctx.is_workday(t), row);
            fixed.push(u8::from(fixed_open(tod, config)));
        }
        let mut paths = vec![f64::NAN; n * HORIZONS];
        for (i, row) in paths.chunks_mut(HORIZONS).enumerate() {
            let t = load.timestamp(i);
            for (j, slot) in row.iter_mut().enumerate() {
                if let Some(v) = nwp.latest_available(schedule, t, j + 1) {
                    *slot = v;
                }
            }
        }
        Ok(Self {
            start: load.start(),
            load: load.values().to_vec(),
            temp: observed_temp.values().to_vec(),
            paths,
            diurnal,
            fixed,
            diurnal_dim: dd,
        })
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn fixed_regimes(&self) -> &[u8] {
        &self.fixed
    }

    fn diurnal_at(&self, j: usize) -> &[f64] {
        &self.diurnal[j * self.diurnal_dim..(j + 1) * self.diurnal_dim]
    }

    fn path(&self, i: usize) -> &[f64] {
        &self.paths[i * HORIZONS..(i + 1) * HORIZONS]
    }

    /// Copy with the load and observed temperature after index `i` replaced
    /// by `f(index, value)`. NWP paths are left alone.
    pub fn perturbed_after(&self, i: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for j in i + 1..self.len() {
            out.load[j] = f(j, out.load[j]);
            out.temp[j] = f(j, out.temp[j]);
        }
        out
    }
}

/// Result of replaying one horizon.
#[derive(Debug, Clone)]
pub struct HorizonRun {
    pub k: usize,
    /// Forecast issued at index `i` for target `i + k`; `NaN` when flagged.
    pub forecasts: Vec<f64>,
    /// Regime used for target `i + k`.
    pub regimes: Vec<u8>,
    /// Issue indices whose forecast could not be formed because an input was
    /// missing.
    pub flagged: usize,
    pub state: RlsState,
    pub regime_state: Option<RlsState>,
}

impl HorizonRun {
    /// `Q[i + k] − Q̂[i + k | i]`, `NaN` where either side is missing.
    pub fn residuals(&self, load: &[f64]) -> Vec<f64> {
        (0..self.forecasts.len())
            .map(|i| load.get(i + self.k).map_or(f64::NAN, |q| q - self.forecasts[i]))
            .collect()
    }
}

/// Replays horizon `k` through the whole record with the given forgetting
/// factor and filter coefficient.
pub fn run_horizon(
    inputs: &ForecastInputs,
    kind: ModelKind,
    n_har: usize,
    spline: Option<&SplineStage>,
    k: usize,
    lambda: f64,
    a_ta: f64,
) -> Result<HorizonRun> {
    if !(1..=HORIZONS).contains(&k) {
        return Err(Error::Parameter(format!("horizon {k} outside 1..={HORIZONS}")));
    }
    if 4 * n_har != inputs.diurnal_dim {
        return Err(Error::Dimension {
            expected: inputs.diurnal_dim,
            got: 4 * n_har,
        });
    }
    // Fail early on a missing or unexpected spline stage.
    build_regressor(kind, 1, inputs.diurnal_at(0), 0.0, spline, &mut Vec::new())?;

    let n = inputs.len();
    let dim = inputs.diurnal_dim + 4;
    let mut state = RlsState::new(dim, lambda)?;
    let mut regime = kind
        .uses_predicted_regime()
        .then(|| RegimeModel::new(n_har, lambda))
        .transpose()?;
    let mut filter = LowPassFilter::new(a_ta)?;

    // Ring of lagged regressors: slot `i % k` holds what was issued at `i`.
    let mut x_cache = vec![0.0; k * dim];
    let mut z_cache = vec![0.0; k * (dim - 2)];
    let mut valid = vec![false; k];
    let mut x = Vec::with_capacity(dim);
    let mut z = Vec::with_capacity(dim - 2);

    let mut forecasts = vec![f64::NAN; n];
    let mut regimes = vec![0u8; n];
    let mut flagged = 0;

    for i in 0..n {
        let t_obs = inputs.temp[i];
        if !t_obs.is_nan() {
            filter.step(t_obs);
        }

        let slot = i % k;
        let q = inputs.load[i];
        if i >= k && valid[slot] && !q.is_nan() {
            state.update(&x_cache[slot * dim..(slot + 1) * dim], q)?;
            if let Some(r) = regime.as_mut() {
                r.update(&z_cache[slot * (dim - 2)..(slot + 1) * (dim - 2)], q)?;
            }
        }

        let target = i + k;
        let d = inputs.diurnal_at(target);
        let open = match &regime {
            Some(r) => u8::from(r.is_open(d)),
            None => inputs.fixed[target],
        };
        regimes[i] = open;

        let mut u = if t_obs.is_nan() { f64::NAN } else { filter.state().unwrap_or(f64::NAN) };
        for p in &inputs.path(i)[..k] {
            u = a_ta * u + (1.0 - a_ta) * p;
        }
        if u.is_nan() {
            valid[slot] = false;
            flagged += 1;
            continue;
        }

        build_regressor(kind, open, d, u, spline, &mut x)?;
        forecasts[i] = state.predict(&x)?;
        x_cache[slot * dim..(slot + 1) * dim].copy_from_slice(&x);
        if regime.is_some() {
            RegimeModel::regressor(d, u, &mut z);
            z_cache[slot * (dim - 2)..(slot + 1) * (dim - 2)].copy_from_slice(&z);
        }
        valid[slot] = true;
    }

    Ok(HorizonRun {
        k,
        forecasts,
        regimes,
        flagged,
        state,
        regime_state: regime.map(|r| r.state().clone()),
    })
}

/// Forecasts, residuals and regimes for every horizon.
#[derive(Debug, Clone)]
pub struct ForecastOutput {
    pub forecasts: HorizonMatrix,
    pub residuals: HorizonMatrix,
    /// 1.0 for opening, 0.0 for closing, per issue time and horizon.
    pub regimes: HorizonMatrix,
    /// Flagged forecast count per horizon, index `k - 1`.
    pub flagged: Vec<usize>,
    pub runs: Vec<HorizonRun>,
}

/// Replays the selected horizons; horizons share no state.
pub fn run_horizons(
    config: &ModelConfig,
    spline: Option<&SplineStage>,
    inputs: &ForecastInputs,
    horizons: &[usize],
    mode: Parallelism,
) -> Result<Vec<HorizonRun>> {
    map_range(mode, 0..horizons.len(), |h| {
        let k = horizons[h];
        if !(1..=HORIZONS).contains(&k) {
            return Err(Error::Parameter(format!("horizon {k} outside 1..={HORIZONS}")));
        }
        run_horizon(
            inputs,
            config.kind,
            config.n_har,
            spline,
            k,
            config.lambda_for(k),
            config.a_ta_for(k),
        )
    })
    .into_iter()
    .collect()
}

pub fn run_forecast(
    config: &ModelConfig,
    spline: Option<&SplineStage>,
    inputs: &ForecastInputs,
    mode: Parallelism,
) -> Result<ForecastOutput> {
    let all: Vec<usize> = (1..=HORIZONS).collect();
    let runs = run_horizons(config, spline, inputs, &all, mode)?;
    let n = inputs.len();
    let mut forecasts = HorizonMatrix::hourly(inputs.start, n, HORIZONS);
    let mut residuals = HorizonMatrix::hourly(inputs.start, n, HORIZONS);
    let mut regimes = HorizonMatrix::hourly(inputs.start, n, HORIZONS);
    for run in &runs {
        let res = run.residuals(&inputs.load);
        for i in 0..n {
            forecasts.set(i, run.k, run.forecasts[i]);
            residuals.set(i, run.k, res[i]);
            regimes.set(i, run.k, f64::from(run.regimes[i]));
        }
    }
    Ok(ForecastOutput {
        forecasts,
        residuals,
        regimes,
        flagged: runs.iter().map(|r| r.flagged).collect(),
        runs,
    })
}

/// Builds the inputs and replays all horizons in one call.
pub fn forecast_series(
    config: &ModelConfig,
    spline: Option<&SplineStage>,
    load: &HourlySeries,
    observed_temp: &HourlySeries,
    nwp: &HorizonMatrix,
    schedule: &NwpSchedule,
    ctx: &CalendarContext,
) -> Result<ForecastOutput> {
    let inputs = ForecastInputs::new(config, load, observed_temp, nwp, schedule, ctx)?;
    run_forecast(config, spline, &inputs, Parallelism::default())
}

/// Target time of the forecast issued at row `i` for horizon `k`.
pub fn target_time(inputs: &ForecastInputs, i: usize, k: usize) -> Timestamp {
    add_hours(inputs.start, (i + k) as i64)
}
