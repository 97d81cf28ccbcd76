//! Gap repair by copying from the same hour one day or one week earlier.

use crate::error::{Error, Result};
use crate::series::HourlySeries;

pub const DEFAULT_LONG_GAP_HOURS: usize = 24;
const DAY: usize = 24;
const WEEK: usize = 168;

/// A run of consecutive missing samples and the shift used to fill it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapRun {
    pub start: usize,
    pub len: usize,
    pub shift: usize,
}

/// Missing runs in chronological order, with the source shift each one will
/// use: one week back for runs longer than `long_gap_threshold_hours`, one
/// day back otherwise.
pub fn gap_runs(series: &HourlySeries, long_gap_threshold_hours: usize) -> Vec<GapRun> {
    runs_of(
        &series.values().iter().map(|v| v.is_nan()).collect::<Vec<_>>(),
        long_gap_threshold_hours,
    )
}

fn runs_of(missing: &[bool], threshold: usize) -> Vec<GapRun> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < missing.len() {
        if !missing[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < missing.len() && missing[i] {
            i += 1;
        }
        let len = i - start;
        let shift = if len > threshold { WEEK } else { DAY };
        runs.push(GapRun { start, len, shift });
    }
    runs
}

pub fn repair_gaps(series: &HourlySeries, long_gap_threshold_hours: usize) -> Result<HourlySeries> {
    if long_gap_threshold_hours == 0 {
        return Err(Error::Parameter("long gap threshold must be positive".into()));
    }
    let runs = gap_runs(series, long_gap_threshold_hours);
    let mut out = series.clone();
    fill_runs(&mut out, &runs)?;
    Ok(out)
}

fn fill_runs(series: &mut HourlySeries, runs: &[GapRun]) -> Result<()> {
    for run in runs {
        for i in run.start..run.start + run.len {
            let source = i.checked_sub(run.shift);
            let value = source.map(|s| series.values()[s]).unwrap_or(f64::NAN);
            if value.is_nan() {
                return Err(Error::UnrepairableGap {
                    start: run.start,
                    end: run.start + run.len,
                    source_index: source,
                });
            }
            series.set_value(i, value);
        }
    }
    Ok(())
}

/// Repairs co-registered series together: a slot missing in any series is
/// replaced in all of them, over the same intervals.
pub fn repair_joint(
    series: &[HourlySeries],
    long_gap_threshold_hours: usize,
) -> Result<(Vec<HourlySeries>, Vec<GapRun>)> {
    let Some(first) = series.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    if long_gap_threshold_hours == 0 {
        return Err(Error::Parameter("long gap threshold must be positive".into()));
    }
    for s in series {
        if s.start() != first.start() || s.len() != first.len() {
            return Err(Error::Parameter("series are not co-registered".into()));
        }
    }
    let union: Vec<bool> = (0..first.len())
        .map(|i| series.iter().any(|s| s.is_missing(i)))
        .collect();
    let runs = runs_of(&union, long_gap_threshold_hours);
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        let mut s = s.clone();
        for run in &runs {
            for i in run.start..run.start + run.len {
                s.mark_missing(i);
            }
        }
        fill_runs(&mut s, &runs)?;
        out.push(s);
    }
    Ok((out, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> HourlySeries {
        HourlySeries::new(Utc.with_ymd_and_hms(2012, 5, 1, 0, 0, 0).unwrap(), values, "kW").unwrap()
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn single_hour_from_day_before() {
        let mut v = ramp(40);
        v[6] = 5.0;
        v[30] = f64::NAN;
        let out = repair_gaps(&series(v), 24).unwrap();
        assert_eq!(out.values()[30], 5.0);
        assert!(out.gap_mask()[30]);
        assert_eq!(out.gap_mask().iter().filter(|g| **g).count(), 1);
    }

    #[test]
    fn long_gap_from_week_before() {
        let mut v = ramp(400);
        for x in &mut v[200..248] {
            *x = f64::NAN;
        }
        let out = repair_gaps(&series(v), 24).unwrap();
        for i in 200..248 {
            assert_eq!(out.values()[i], (i - 168) as f64);
        }
    }

    #[test]
    fn gap_of_exactly_threshold_uses_day_before() {
        let mut v = ramp(200);
        for x in &mut v[100..124] {
            *x = f64::NAN;
        }
        let out = repair_gaps(&series(v), 24).unwrap();
        assert_eq!(out.values()[100], 76.0);
    }

    #[test]
    fn no_gaps_is_identity() {
        let s = series(ramp(50));
        assert_eq!(repair_gaps(&s, 24).unwrap(), s);
    }

    #[test]
    fn earlier_repairs_feed_later_ones() {
        let mut v = ramp(80);
        v[30] = f64::NAN;
        v[54] = f64::NAN;
        let out = repair_gaps(&series(v), 24).unwrap();
        assert_eq!(out.values()[30], 6.0);
        assert_eq!(out.values()[54], 6.0);
    }

    #[test]
    fn unrepairable_reports_interval() {
        let mut v = ramp(60);
        v[10] = f64::NAN;
        v[11] = f64::NAN;
        match repair_gaps(&series(v), 24) {
            Err(Error::UnrepairableGap { start, end, source_index }) => {
                assert_eq!((start, end, source_index), (10, 12, None));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn joint_repair_replaces_all_series() {
        let load = ramp(60);
        let mut temp: Vec<f64> = ramp(60).iter().map(|x| 100.0 + x).collect();
        temp[40] = f64::NAN;
        let (out, runs) = repair_joint(&[series(load), series(temp)], 24).unwrap();
        assert_eq!(runs, vec![GapRun { start: 40, len: 1, shift: 24 }]);
        assert_eq!(out[0].values()[40], 16.0);
        assert!(out[0].gap_mask()[40]);
        assert_eq!(out[1].values()[40], 116.0);
    }

    proptest! {
        #[test]
        fn idempotent_and_local(holes in proptest::collection::vec((30usize..300, 1usize..60), 0..4)) {
            let mut v: Vec<f64> = (0..400).map(|i| ((i * 7919) % 97) as f64).collect();
            for (s, l) in &holes {
                for x in v.iter_mut().skip(*s + 168).take(*l) {
                    *x = f64::NAN;
                }
            }
            let s = series(v);
            if let Ok(once) = repair_gaps(&s, 24) {
                let twice = repair_gaps(&once, 24).unwrap();
                prop_assert_eq!(&once, &twice);
                for i in 0..s.len() {
                    if !s.gap_mask()[i] {
                        prop_assert_eq!(once.values()[i], s.values()[i]);
                    }
                    prop_assert_eq!(once.gap_mask()[i], s.gap_mask()[i]);
                }
            }
        }
    }
}
