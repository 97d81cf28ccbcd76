//! Seeded synthetic supermarket records with known ground truth.
//!
//! Load is a base level plus an opening-hours lift, a smooth bump during
//! opening, a piecewise-linear response to low-pass filtered temperature
//! (steeper above a kink), defrost spikes and AR(1) noise. Weather forecasts
//! are the true future temperature plus a bias and an error that wanders
//! with the horizon.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::LowPassFilter;
use crate::calendar::{add_hours, parse_timestamp, CalendarContext, Timestamp};
use crate::error::{Error, Result};
use crate::kv::parse_kv;
use crate::series::HourlySeries;
use crate::weather::HorizonMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub start: Timestamp,
    pub hours: usize,
    pub seed: u64,
    pub utc_offset_hours: i32,
    /// Opening window (inclusive local hours) on workdays.
    pub workday_open: (u32, u32),
    pub weekend_open: (u32, u32),
    pub base_kw: f64,
    pub open_lift_kw: f64,
    /// Height of the smooth bump over the opening window.
    pub workday_amplitude_kw: f64,
    pub weekend_amplitude_kw: f64,
    pub temp_mean: f64,
    /// Rise over the year's warm half, peaking mid-July.
    pub temp_annual_amplitude: f64,
    pub temp_diurnal_amplitude: f64,
    pub temp_ar_phi: f64,
    pub temp_ar_std: f64,
    /// Coefficient of the filter between ambient temperature and load.
    pub a_ta: f64,
    pub slope_open: f64,
    pub slope_close: f64,
    pub kink_temp: f64,
    /// Slope multiplier above the kink; 1 disables the nonlinearity.
    pub kink_slope_ratio: f64,
    pub defrost_hours: Vec<u32>,
    pub defrost_kw: f64,
    pub noise_std: f64,
    pub noise_phi: f64,
    pub nwp_bias: f64,
    /// Stationary standard deviation of the forecast error far out.
    pub nwp_noise_std: f64,
    /// Correlation of the forecast error between adjacent horizons.
    pub nwp_rho: f64,
    pub nwp_issues_per_day: u32,
    pub nwp_horizons: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2012, 5, 1, 0, 0, 0).unwrap(),
            hours: 2208,
            seed: 2012,
            utc_offset_hours: 0,
            workday_open: (8, 21),
            weekend_open: (9, 17),
            base_kw: 30.0,
            open_lift_kw: 15.0,
            workday_amplitude_kw: 3.0,
            weekend_amplitude_kw: 2.0,
            temp_mean: 15.0,
            temp_annual_amplitude: 4.0,
            temp_diurnal_amplitude: 4.0,
            temp_ar_phi: 0.97,
            temp_ar_std: 5.0,
            a_ta: 0.6,
            slope_open: 1.0,
            slope_close: 0.5,
            kink_temp: 18.0,
            kink_slope_ratio: 2.0,
            defrost_hours: vec![6, 18],
            defrost_kw: 3.0,
            noise_std: 1.0,
            noise_phi: 0.5,
            nwp_bias: -3.0,
            nwp_noise_std: 1.5,
            nwp_rho: 0.95,
            nwp_issues_per_day: 4,
            nwp_horizons: 54,
        }
    }
}

impl ScenarioConfig {
    /// No load or forecast noise, no kink, no defrost, no seasonal drift.
    pub fn noiseless() -> Self {
        Self {
            temp_annual_amplitude: 0.0,
            kink_slope_ratio: 1.0,
            defrost_kw: 0.0,
            noise_std: 0.0,
            nwp_noise_std: 0.0,
            ..Self::default()
        }
    }

    pub fn calendar(&self) -> CalendarContext {
        CalendarContext::with_offset(self.utc_offset_hours)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.hours < 48 {
            return bad("scenario needs at least 48 hours");
        }
        for (o, c) in [self.workday_open, self.weekend_open] {
            if !(o <= c && c < 24) {
                return bad("opening window must satisfy open <= close < 24");
            }
        }
        let magnitudes = [
            self.base_kw,
            self.open_lift_kw,
            self.workday_amplitude_kw,
            self.weekend_amplitude_kw,
            self.temp_annual_amplitude,
            self.temp_diurnal_amplitude,
            self.temp_ar_std,
            self.defrost_kw,
            self.noise_std,
            self.nwp_noise_std,
            self.kink_slope_ratio,
        ];
        if magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return bad("magnitudes must be finite and non-negative");
        }
        for phi in [self.temp_ar_phi, self.noise_phi, self.nwp_rho] {
            if !(0.0..1.0).contains(&phi) {
                return bad("autocorrelations must lie in [0, 1)");
            }
        }
        if !(0.0..1.0).contains(&self.a_ta) {
            return bad("a_ta must lie in [0, 1)");
        }
        if self.defrost_hours.iter().any(|h| *h >= 24) {
            return bad("defrost hours must be below 24");
        }
        if self.nwp_horizons == 0 || self.nwp_issues_per_day == 0 || 24 % self.nwp_issues_per_day != 0 {
            return bad("forecast issues must divide the day evenly");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in parse_kv(text)? {
            let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
            let f = || value.parse::<f64>().map_err(|_| bad());
            let window = || -> Result<(u32, u32)> {
                let (a, b) = value.split_once(',').ok_or_else(bad)?;
                Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
            };
            match key.as_str() {
                "start" => c.start = parse_timestamp(&value).ok_or_else(bad)?,
                "hours" => c.hours = value.parse().map_err(|_| bad())?,
                "seed" => c.seed = value.parse().map_err(|_| bad())?,
                "utc_offset_hours" => c.utc_offset_hours = value.parse().map_err(|_| bad())?,
                "workday_open" => c.workday_open = window()?,
                "weekend_open" => c.weekend_open = window()?,
                "base_kw" => c.base_kw = f()?,
                "open_lift_kw" => c.open_lift_kw = f()?,
                "workday_amplitude_kw" => c.workday_amplitude_kw = f()?,
                "weekend_amplitude_kw" => c.weekend_amplitude_kw = f()?,
                "temp_mean" => c.temp_mean = f()?,
                "temp_annual_amplitude" => c.temp_annual_amplitude = f()?,
                "temp_diurnal_amplitude" => c.temp_diurnal_amplitude = f()?,
                "temp_ar_phi" => c.temp_ar_phi = f()?,
                "temp_ar_std" => c.temp_ar_std = f()?,
                "a_ta" => c.a_ta = f()?,
                "slope_open" => c.slope_open = f()?,
                "slope_close" => c.slope_close = f()?,
                "kink_temp" => c.kink_temp = f()?,
                "kink_slope_ratio" => c.kink_slope_ratio = f()?,
                "defrost_hours" => {
                    c.defrost_hours = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?
                }
                "defrost_kw" => c.defrost_kw = f()?,
                "noise_std" => c.noise_std = f()?,
                "noise_phi" => c.noise_phi = f()?,
                "nwp_bias" => c.nwp_bias = f()?,
                "nwp_noise_std" => c.nwp_noise_std = f()?,
                "nwp_rho" => c.nwp_rho = f()?,
                "nwp_issues_per_day" => c.nwp_issues_per_day = value.parse().map_err(|_| bad())?,
                "nwp_horizons" => c.nwp_horizons = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn is_open(&self, t: Timestamp) -> bool {
        let ctx = self.calendar();
        let hour = ctx.time_of_day(t) as u32;
        let (o, c) = if ctx.is_workday(t) { self.workday_open } else { self.weekend_open };
        (o..=c).contains(&hour)
    }

    /// Deterministic part of the load for a given regime and filtered
    /// temperature, without the diurnal bump, defrost or noise.
    pub fn temperature_response(&self, open: bool, filtered_temp: f64) -> f64 {
        let slope = if open { self.slope_open } else { self.slope_close };
        let excess = (filtered_temp - self.kink_temp).max(0.0);
        slope * (filtered_temp - self.temp_mean) + slope * (self.kink_slope_ratio - 1.0) * excess
    }
}

/// What the generator knows that the models must infer.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// 1 during the opening window, per hour of the record.
    pub regimes: Vec<u8>,
    /// Ambient temperature after the generative filter.
    pub filtered_temp: Vec<f64>,
    /// Load without the AR noise.
    pub clean_load: Vec<f64>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub load: HourlySeries,
    pub temp_obs: HourlySeries,
    pub nwp: HorizonMatrix,
    pub truth: GroundTruth,
}

pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let ctx = config.calendar();
    let n = config.hours;
    // Temperature runs past the record end so late forecasts have a truth.
    let total = n + config.nwp_horizons + 24;

    let mut temp = Vec::with_capacity(total);
    let mut dev = 0.0;
    let dev_innovation = config.temp_ar_std * (1.0 - config.temp_ar_phi.powi(2)).sqrt();
    for i in 0..total {
        let t = add_hours(config.start, i as i64);
        let day = t.timestamp() as f64 / 86_400.0;
        // Coldest around mid-January, warmest around mid-July.
        let annual = -(2.0 * PI * (day - 15.0) / 365.25).cos();
        let tod = ctx.time_of_day(t);
        let diurnal = -(2.0 * PI * (tod - 3.0) / 24.0).cos();
        dev = config.temp_ar_phi * dev + dev_innovation * normal();
        temp.push(
            config.temp_mean
                + config.temp_annual_amplitude * annual
                + config.temp_diurnal_amplitude * diurnal
                + dev,
        );
    }

    let filtered = LowPassFilter::new(config.a_ta)?.apply(&temp[..n]);
    let mut regimes = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    let mut load = Vec::with_capacity(n);
    let mut noise = 0.0;
    let noise_innovation = config.noise_std * (1.0 - config.noise_phi.powi(2)).sqrt();
    for (i, tf) in filtered.iter().enumerate() {
        let t = add_hours(config.start, i as i64);
        let open = config.is_open(t);
        let hour = ctx.time_of_day(t) as u32;
        let (o, c, amp) = if ctx.is_workday(t) {
            (config.workday_open.0, config.workday_open.1, config.workday_amplitude_kw)
        } else {
            (config.weekend_open.0, config.weekend_open.1, config.weekend_amplitude_kw)
        };
        let bump = if open {
            amp * (PI * (f64::from(hour - o) + 0.5) / f64::from(c - o + 1)).sin()
        } else {
            0.0
        };
        let defrost = if config.defrost_hours.contains(&hour) { config.defrost_kw } else { 0.0 };
        let q = config.base_kw
            + if open { config.open_lift_kw } else { 0.0 }
            + bump
            + config.temperature_response(open, *tf)
            + defrost;
        noise = config.noise_phi * noise + noise_innovation * normal();
        regimes.push(u8::from(open));
        clean.push(q);
        load.push(q + noise);
    }

    let step = 24 / config.nwp_issues_per_day as usize;
    let k = config.nwp_horizons;
    let issues: Vec<Timestamp> = (0..n).step_by(step).map(|i| add_hours(config.start, i as i64)).collect();
    let mut values = Vec::with_capacity(issues.len() * k);
    let err_innovation = config.nwp_noise_std * (1.0 - config.nwp_rho.powi(2)).sqrt();
    for row in 0..issues.len() {
        let s = row * step;
        let mut err = 0.0;
        for h in 1..=k {
            err = config.nwp_rho * err + err_innovation * normal();
            values.push(temp[s + h] + config.nwp_bias + err);
        }
    }

    Ok(Scenario {
        load: HourlySeries::new(config.start, load, "kW")?,
        temp_obs: HourlySeries::new(config.start, temp[..n].to_vec(), "degC")?,
        nwp: HorizonMatrix::new(issues, k, values)?,
        truth: GroundTruth {
            regimes,
            filtered_temp: filtered,
            clean_load: clean,
            config: config.clone(),
        },
    })
}

/// Marks `(start_index, length)` stretches as missing.
pub fn inject_gaps(series: &HourlySeries, gaps: &[(usize, usize)]) -> Result<HourlySeries> {
    let mut out = series.clone();
    for &(start, len) in gaps {
        if len == 0 || start + len > series.len() {
            return Err(Error::Range(format!(
                "gap of {len} hours at index {start} does not fit a record of {} hours",
                series.len()
            )));
        }
        for i in start..start + len {
            out.mark_missing(i);
        }
    }
    Ok(out)
}

/// Residuals following `e[j] = a₁e[j−1] + a₂e[j−2] + a₂₄e[j−24] + w[j]`.
/// With `drift > 0` the lag-1 coefficient swings by `±drift` over a period
/// of `drift_period` hours, compensated on lag 2 to stay stationary.
pub fn planted_ar_residuals(
    start: Timestamp,
    n: usize,
    coefficients: [f64; 3],
    std: f64,
    drift: f64,
    drift_period: f64,
    seed: u64,
) -> Result<HourlySeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warmup = 240;
    let mut e = vec![0.0; n + warmup];
    for j in 24..e.len() {
        let phase = (j as f64 - warmup as f64) / drift_period.max(1.0);
        let swing = drift * (2.0 * PI * phase).sin();
        let a1 = coefficients[0] + swing;
        let a2 = coefficients[1] - 0.5 * swing;
        let w: f64 = StandardNormal.sample(&mut rng);
        e[j] = a1 * e[j - 1] + a2 * e[j - 2] + coefficients[2] * e[j - 24] + std * w;
    }
    HourlySeries::new(start, e.split_off(warmup), "kW")
}
