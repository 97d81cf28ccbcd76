//! Numerical weather predictions: the issue-by-horizon matrix, delivery
//! delay semantics, calibration against local observations, and splicing of
//! observations with forecasts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::calendar::{add_hours, format_timestamp, hours_between, parse_timestamp, Timestamp};
use crate::error::{Error, Result};
use crate::exec::{map_range, Parallelism};
use crate::repair::GapRun;
use crate::series::HourlySeries;

pub const DEFAULT_SPAN: f64 = 0.75;
const MIN_CALIBRATION_PAIRS: usize = 100;

/// Values indexed by issue time and horizon `1..=K`. Missing entries are
/// `NaN`. Issue times are strictly increasing but need not be contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonMatrix {
    issue_times: Vec<Timestamp>,
    max_horizon: usize,
    values: Vec<f64>,
}

impl HorizonMatrix {
    pub fn new(issue_times: Vec<Timestamp>, max_horizon: usize, values: Vec<f64>) -> Result<Self> {
        if max_horizon == 0 {
            return Err(Error::Parameter("horizon count must be positive".into()));
        }
        if values.len() != issue_times.len() * max_horizon {
            return Err(Error::Dimension {
                expected: issue_times.len() * max_horizon,
                got: values.len(),
            });
        }
        if issue_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("issue times must be strictly increasing".into()));
        }
        Ok(Self {
            issue_times,
            max_horizon,
            values,
        })
    }

    pub fn filled(issue_times: Vec<Timestamp>, max_horizon: usize, value: f64) -> Result<Self> {
        let n = issue_times.len() * max_horizon;
        Self::new(issue_times, max_horizon, vec![value; n])
    }

    /// One row per hour starting at `start`.
    pub fn hourly(start: Timestamp, rows: usize, max_horizon: usize) -> Self {
        let times = (0..rows).map(|i| add_hours(start, i as i64)).collect();
        Self::filled(times, max_horizon, f64::NAN).expect("hourly rows are increasing")
    }

    pub fn issue_times(&self) -> &[Timestamp] {
        &self.issue_times
    }

    pub fn rows(&self) -> usize {
        self.issue_times.len()
    }

    pub fn max_horizon(&self) -> usize {
        self.max_horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.max_horizon..(row + 1) * self.max_horizon]
    }

    /// Entry for 1-based horizon `k`.
    pub fn get(&self, row: usize, k: usize) -> f64 {
        self.values[row * self.max_horizon + k - 1]
    }

    pub fn set(&mut self, row: usize, k: usize, value: f64) {
        self.values[row * self.max_horizon + k - 1] = value;
    }

    pub fn row_of(&self, issue: Timestamp) -> Option<usize> {
        self.issue_times.binary_search(&issue).ok()
    }

    /// Column `k` as a vector over rows.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, k)).collect()
    }

    /// Value for target `t + k` from the most recent issue available at `t`
    /// that covers the target, skipping missing entries.
    pub fn latest_available(&self, schedule: &NwpSchedule, t: Timestamp, k: usize) -> Option<f64> {
        let target = add_hours(t, k as i64);
        let last_issue = add_hours(t, -schedule.completion_delay_hours);
        let end = self.issue_times.partition_point(|i| *i <= last_issue);
        for row in (0..end).rev() {
            let h = hours_between(self.issue_times[row], target)?;
            if h < 1 {
                continue;
            }
            if h as usize > self.max_horizon {
                return None;
            }
            let v = self.get(row, h as usize);
            if !v.is_nan() {
                return Some(v);
            }
        }
        None
    }

    /// Rows issued inside a repaired gap are copied from the row issued
    /// `shift` hours earlier, when that row exists.
    pub fn repair_rows(&mut self, record_start: Timestamp, runs: &[GapRun]) {
        for run in runs {
            let from = add_hours(record_start, run.start as i64);
            let to = add_hours(record_start, (run.start + run.len) as i64);
            for row in 0..self.rows() {
                let issue = self.issue_times[row];
                if issue < from || issue >= to {
                    continue;
                }
                if let Some(src) = self.row_of(add_hours(issue, -(run.shift as i64))) {
                    let k = self.max_horizon;
                    let copy = self.row(src).to_vec();
                    self.values[row * k..(row + 1) * k].copy_from_slice(&copy);
                }
            }
        }
    }
}

/// Issue cadence and delivery delay of the weather forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NwpSchedule {
    pub issues_per_day: u32,
    pub completion_delay_hours: i64,
}

impl Default for NwpSchedule {
    fn default() -> Self {
        Self {
            issues_per_day: 4,
            completion_delay_hours: 4,
        }
    }
}

impl NwpSchedule {
    pub fn availability(&self, issue: Timestamp) -> Timestamp {
        add_hours(issue, self.completion_delay_hours)
    }

    /// Whether `t` is one of the scheduled issue times (aligned to 00:00 UTC).
    pub fn is_issue_time(&self, t: Timestamp) -> bool {
        let step = 24 / i64::from(self.issues_per_day.clamp(1, 24));
        let secs = t.timestamp();
        secs % 3600 == 0 && (secs / 3600).rem_euclid(step) == 0
    }
}

pub fn latest_available_forecast(
    matrix: &HorizonMatrix,
    schedule: &NwpSchedule,
    t: Timestamp,
    k: usize,
) -> Result<f64> {
    matrix
        .latest_available(schedule, t, k)
        .ok_or_else(|| Error::Availability {
            at: format_timestamp(t),
            target: format_timestamp(add_hours(t, k as i64)),
        })
}

/// Observations up to and including `t`, followed by the forecasts for
/// `t + 1 ..= t + k`.
pub fn combine_series(
    observed: &HourlySeries,
    calibrated: &HorizonMatrix,
    schedule: &NwpSchedule,
    t: Timestamp,
    k: usize,
) -> Result<Vec<f64>> {
    let end = observed
        .index_of(t)
        .ok_or_else(|| Error::Range(format!("{} outside the observed record", format_timestamp(t))))?;
    let mut out = observed.values()[..=end].to_vec();
    for j in 1..=k {
        out.push(latest_available_forecast(calibrated, schedule, t, j)?);
    }
    Ok(out)
}

/// Local linear regression with tricube weights over a fraction `span` of
/// the points nearest each query.
#[derive(Debug, Clone)]
pub struct LocalLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    neighbours: usize,
}

impl LocalLinear {
    pub fn fit(pairs: &[(f64, f64)], span: f64) -> Result<Self> {
        if !(span > 0.0 && span <= 1.0) {
            return Err(Error::Parameter(format!("span {span} outside (0, 1]")));
        }
        if pairs.len() < 2 {
            return Err(Error::Length {
                needed: 2,
                got: pairs.len(),
            });
        }
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let neighbours = ((span * sorted.len() as f64).floor() as usize).clamp(2, sorted.len());
        Ok(Self {
            xs: sorted.iter().map(|p| p.0).collect(),
            ys: sorted.iter().map(|p| p.1).collect(),
            neighbours,
        })
    }

    /// Fitted value; queries outside the data range use the boundary fit.
    pub fn predict(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        // Grow a contiguous window of the `neighbours` closest points.
        let pos = self.xs.partition_point(|v| *v < x);
        let (mut lo, mut hi) = (pos, pos);
        while hi - lo < self.neighbours {
            let take_left = match (lo > 0, hi < n) {
                (true, true) => x - self.xs[lo - 1] <= self.xs[hi] - x,
                (true, false) => true,
                _ => false,
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let bandwidth = (x - self.xs[lo]).max(self.xs[hi - 1] - x);
        let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in lo..hi {
            let dx = self.xs[i] - x;
            let w = if bandwidth > 0.0 {
                let u = (dx.abs() / bandwidth).min(1.0);
                (1.0 - u * u * u).powi(3)
            } else {
                1.0
            };
            sw += w;
            swx += w * dx;
            swy += w * self.ys[i];
            swxx += w * dx * dx;
            swxy += w * dx * self.ys[i];
        }
        if sw <= 0.0 {
            return self.ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        }
        // Centered at x, the intercept is the fitted value.
        let denom = sw * swxx - swx * swx;
        if denom <= 1e-12 * sw * swxx.max(f64::MIN_POSITIVE) || denom <= 0.0 {
            return swy / sw;
        }
        (swxx * swy - swx * swxy) / denom
    }
}

/// Per-horizon local linear calibration of forecasts against the
/// observations at their target times.
pub fn calibrate_nwp(matrix: &HorizonMatrix, observed: &HourlySeries, span: f64) -> Result<HorizonMatrix> {
    calibrate_nwp_with(matrix, observed, span, Parallelism::default())
}

pub fn calibrate_nwp_with(
    matrix: &HorizonMatrix,
    observed: &HourlySeries,
    span: f64,
    mode: Parallelism,
) -> Result<HorizonMatrix> {
    let k_max = matrix.max_horizon();
    let columns = map_range(mode, 1..k_max + 1, |k| -> Result<Vec<f64>> {
        let pairs: Vec<(f64, f64)> = (0..matrix.rows())
            .filter_map(|row| {
                let f = matrix.get(row, k);
                let target = add_hours(matrix.issue_times()[row], k as i64);
                let o = observed.value_at(target)?;
                (!f.is_nan()).then_some((f, o))
            })
            .collect();
        if pairs.len() < MIN_CALIBRATION_PAIRS {
            return Err(Error::Calibration {
                horizon: k,
                message: format!(
                    "{} forecast/observation pairs, need {MIN_CALIBRATION_PAIRS}",
                    pairs.len()
                ),
            });
        }
        let curve = LocalLinear::fit(&pairs, span)?;
        Ok((0..matrix.rows())
            .map(|row| {
                let f = matrix.get(row, k);
                if f.is_nan() {
                    f
                } else {
                    curve.predict(f)
                }
            })
            .collect())
    });
    let mut out = matrix.clone();
    for (k, column) in (1..).zip(columns) {
        for (row, v) in column?.into_iter().enumerate() {
            out.set(row, k, v);
        }
    }
    Ok(out)
}

/// Reads `issue_time,horizon,value` rows. The horizon count is the largest
/// horizon present; absent entries are missing.
pub fn read_horizon_matrix<R: Read>(reader: R) -> Result<HorizonMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))
    };
    let (tc, hc, vc) = (col("issue_time")?, col("horizon")?, col("value")?);
    let mut rows: BTreeMap<Timestamp, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut k_max = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let t = parse_timestamp(field(tc)).ok_or_else(|| Error::Parse {
            row,
            message: format!("malformed timestamp `{}`", field(tc)),
        })?;
        let k: usize = field(hc).parse().map_err(|_| Error::Parse {
            row,
            message: format!("malformed horizon `{}`", field(hc)),
        })?;
        if k == 0 {
            return Err(Error::Parse {
                row,
                message: "horizons start at 1".into(),
            });
        }
        let raw = field(vc);
        let v = if raw.is_empty() {
            f64::NAN
        } else {
            raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("malformed value `{raw}`"),
            })?
        };
        if rows.entry(t).or_default().insert(k, v).is_some() {
            return Err(Error::Duplicate { row });
        }
        k_max = k_max.max(k);
    }
    if rows.is_empty() {
        return Err(Error::Length { needed: 1, got: 0 });
    }
    let times: Vec<Timestamp> = rows.keys().copied().collect();
    let mut m = HorizonMatrix::filled(times, k_max, f64::NAN)?;
    for (r, entries) in rows.values().enumerate() {
        for (&k, &v) in entries {
            m.set(r, k, v);
        }
    }
    Ok(m)
}

pub fn write_horizon_matrix<W: Write>(m: &HorizonMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["issue_time", "horizon", "value"])?;
    for (r, t) in m.issue_times().iter().enumerate() {
        let ts = format_timestamp(*t);
        for k in 1..=m.max_horizon() {
            let v = m.get(r, k);
            let v = if v.is_nan() { String::new() } else { v.to_string() };
            w.write_record([ts.as_str(), &k.to_string(), &v])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn load_horizon_matrix(path: impl AsRef<Path>) -> Result<HorizonMatrix> {
    let path = path.as_ref();
    read_horizon_matrix(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_horizon_matrix(m: &HorizonMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_horizon_matrix(m, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};

    fn ts(d: u32, h: u32) -> Timestamp {
        Utc.with_ymd_and_hms(2012, 5, d, h, 0, 0).unwrap()
    }

    /// Issues every 6 h from 2012-05-01 00:00; entry (issue, k) = 100·issue_row + k.
    fn grid(issues: usize, k: usize) -> HorizonMatrix {
        let times: Vec<_> = (0..issues).map(|i| add_hours(ts(1, 0), 6 * i as i64)).collect();
        let values = (0..issues)
            .flat_map(|r| (1..=k).map(move |h| (100 * r + h) as f64))
            .collect();
        HorizonMatrix::new(times, k, values).unwrap()
    }

    #[test]
    fn delay_gates_availability() {
        let m = grid(8, 54);
        let s = NwpSchedule::default();
        // 06:00 issue (row 1) is available at 10:00; target 11:00 is its horizon 5.
        assert_eq!(latest_available_forecast(&m, &s, ts(1, 10), 1).unwrap(), 105.0);
        // At 09:00 only the 00:00 issue is available: target 10:00 = horizon 10.
        assert_eq!(latest_available_forecast(&m, &s, ts(1, 9), 1).unwrap(), 10.0);
    }

    #[test]
    fn no_issue_available_yet() {
        let m = grid(8, 54);
        let s = NwpSchedule::default();
        let err = latest_available_forecast(&m, &s, ts(1, 3), 1).unwrap_err();
        assert!(matches!(err, Error::Availability { .. }));
    }

    #[test]
    fn only_earlier_issues_before_availability() {
        // Single issue at 06:00: not readable at 09:59.
        let m = HorizonMatrix::filled(vec![ts(1, 6)], 42, 1.0).unwrap();
        let s = NwpSchedule::default();
        let before = ts(1, 9) + chrono::Duration::minutes(59);
        assert!(latest_available_forecast(&m, &s, before, 1).is_err());
        assert!(latest_available_forecast(&m, &s, ts(1, 10), 1).is_ok());
    }

    #[test]
    fn zero_delay_reads_issue_at_issue_time() {
        let m = grid(4, 42);
        let s = NwpSchedule {
            issues_per_day: 4,
            completion_delay_hours: 0,
        };
        assert_eq!(latest_available_forecast(&m, &s, ts(1, 6), 3).unwrap(), 103.0);
    }

    #[test]
    fn horizon_beyond_matrix_is_unavailable() {
        let s = NwpSchedule::default();
        // The freshest issue is always at least 4 h old, so a 42-horizon
        // matrix cannot serve k = 42.
        let short = grid(4, 42);
        assert!(short.latest_available(&s, ts(1, 10), 42).is_none());
        assert_eq!(short.latest_available(&s, ts(1, 10), 38), Some(142.0));
        // At 09:00 the freshest issue is 00:00, so k = 42 is its horizon 51.
        let long = grid(4, 54);
        assert_eq!(long.latest_available(&s, ts(1, 9), 42), Some(51.0));
    }

    #[test]
    fn missing_entry_falls_back_to_older_issue() {
        let mut m = grid(4, 54);
        let s = NwpSchedule::default();
        m.set(1, 5, f64::NAN);
        assert_eq!(m.latest_available(&s, ts(1, 10), 1), Some(11.0));
    }

    fn observed_hourly(n: usize) -> HourlySeries {
        let v = (0..n).map(|i| 10.0 + 5.0 * ((i as f64) / 5.0).sin()).collect();
        HourlySeries::new(ts(1, 0), v, "C").unwrap()
    }

    /// Forecast matrix equal to `f(observation)` at every (issue, k).
    fn mapped(obs: &HourlySeries, k: usize, f: impl Fn(f64) -> f64) -> HorizonMatrix {
        let times: Vec<_> = (0..obs.len() / 6 - 10).map(|i| add_hours(ts(1, 0), 6 * i as i64)).collect();
        let values = times
            .iter()
            .flat_map(|t| (1..=k).map(|h| f(obs.value_at(add_hours(*t, h as i64)).unwrap())).collect::<Vec<_>>())
            .collect();
        HorizonMatrix::new(times, k, values).unwrap()
    }

    #[test]
    fn combine_appends_forecasts() {
        let obs = observed_hourly(24 * 40);
        let m = mapped(&obs, 54, |v| v);
        let s = NwpSchedule::default();
        let t = ts(3, 13);
        let one = combine_series(&obs, &m, &s, t, 1).unwrap();
        let idx = obs.index_of(t).unwrap();
        assert_eq!(one.len(), idx + 2);
        let full = combine_series(&obs, &m, &s, t, 42).unwrap();
        assert_eq!(full.len(), idx + 43);
        assert_eq!(&full[..one.len()], one.as_slice());
        // Perfect forecasts reproduce the observed series.
        assert_eq!(full.as_slice(), &obs.values()[..idx + 43]);
    }

    #[test]
    fn calibration_identity() {
        let obs = observed_hourly(24 * 60);
        let m = mapped(&obs, 6, |v| v);
        let cal = calibrate_nwp(&m, &obs, 0.75).unwrap();
        for (a, b) in cal.values().iter().zip(m.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_removes_offset_and_scale() {
        let obs = observed_hourly(24 * 60);
        for (f, tol) in [(Box::new(|v: f64| v - 3.0) as Box<dyn Fn(f64) -> f64>, 1e-6), (Box::new(|v: f64| 0.5 * v), 1e-3)] {
            let m = mapped(&obs, 6, f);
            let cal = calibrate_nwp(&m, &obs, 0.75).unwrap();
            for row in 0..cal.rows() {
                for k in 1..=6 {
                    let target = add_hours(cal.issue_times()[row], k as i64);
                    let want = obs.value_at(target).unwrap();
                    assert!((cal.get(row, k) - want).abs() < tol);
                }
            }
        }
    }

    #[test]
    fn calibration_needs_overlap() {
        let obs = observed_hourly(24 * 10);
        let m = mapped(&obs, 3, |v| v);
        match calibrate_nwp(&m, &obs, 0.75) {
            Err(Error::Calibration { horizon: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn calibration_preserves_monotone_map() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(f64, f64)> = (0..400)
            .map(|_| {
                let x: f64 = rng.gen_range(0.0..20.0);
                (x, (x / 8.0).exp())
            })
            .collect();
        let curve = LocalLinear::fit(&pairs, 0.75).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let y = curve.predict(i as f64 * 0.1);
            assert!(y >= prev);
            prev = y;
        }
        // Clamped beyond the data.
        assert_eq!(curve.predict(-50.0), curve.predict(pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)));
    }

    #[test]
    fn csv_round_trip() {
        let mut m = grid(3, 4);
        m.set(1, 2, f64::NAN);
        let mut buf = Vec::new();
        write_horizon_matrix(&m, &mut buf).unwrap();
        let back = read_horizon_matrix(buf.as_slice()).unwrap();
        assert_eq!(back.issue_times(), m.issue_times());
        assert!(back.get(1, 2).is_nan());
        assert_eq!(back.get(2, 4), m.get(2, 4));
    }

    #[test]
    fn csv_rejects_duplicates() {
        let text = "issue_time,horizon,value\n2012-05-01T00:00:00Z,1,3\n2012-05-01T00:00:00Z,1,4\n";
        assert!(matches!(read_horizon_matrix(text.as_bytes()), Err(Error::Duplicate { row: 2 })));
    }

    #[test]
    fn schedule_issue_times() {
        let s = NwpSchedule::default();
        assert!(s.is_issue_time(ts(1, 6)));
        assert!(!s.is_issue_time(ts(1, 7)));
        assert_eq!(s.availability(ts(1, 6)), ts(1, 10));
    }
}
