//! Forecast evaluation: RMSE per horizon and residual diagnostics.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::calendar::{add_hours, Timestamp};
use crate::error::{Error, Result};
use crate::weather::HorizonMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RmseCurve {
    /// RMSE per horizon, index `k - 1`.
    pub rmse: Vec<f64>,
    /// Residuals included per horizon.
    pub counts: Vec<usize>,
    /// Missing residuals after the cut, per horizon.
    pub excluded: Vec<usize>,
    /// Issue times before this instant are burn-in.
    pub cut: Timestamp,
}

impl RmseCurve {
    pub fn mean(&self, horizons: std::ops::RangeInclusive<usize>) -> f64 {
        let v: Vec<f64> = horizons.map(|k| self.rmse[k - 1]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["horizon", "rmse", "count"])?;
        for (k, (r, c)) in self.rmse.iter().zip(&self.counts).enumerate() {
            w.write_record([(k + 1).to_string(), r.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// RMSE of every horizon over issue times at least `burn_in_hours` after the
/// first issue. Missing residuals are skipped and counted.
pub fn rmse_per_horizon(residuals: &HorizonMatrix, burn_in_hours: usize) -> Result<RmseCurve> {
    let first = *residuals
        .issue_times()
        .first()
        .ok_or(Error::EmptyEvaluation)?;
    let cut = add_hours(first, burn_in_hours as i64);
    let kmax = residuals.max_horizon();
    let mut sums = vec![0.0; kmax];
    let mut counts = vec![0usize; kmax];
    let mut excluded = vec![0usize; kmax];
    for (row, issue) in residuals.issue_times().iter().enumerate() {
        if *issue < cut {
            continue;
        }
        for (k, e) in residuals.row(row).iter().enumerate() {
            if e.is_nan() {
                excluded[k] += 1;
            } else {
                sums[k] += e * e;
                counts[k] += 1;
            }
        }
    }
    if counts.contains(&0) {
        return Err(Error::EmptyEvaluation);
    }
    Ok(RmseCurve {
        rmse: sums.iter().zip(&counts).map(|(s, c)| (s / *c as f64).sqrt()).collect(),
        counts,
        excluded,
        cut,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    /// `rho[h]` for lags `0..=max_lag`.
    pub rho: Vec<f64>,
    /// White-noise band half-width, `1.96 / √n`.
    pub ci: f64,
}

impl AcfResult {
    /// Lags in `1..=max_lag` whose autocorrelation leaves the band.
    pub fn outside_band(&self, max_lag: usize) -> usize {
        self.rho
            .iter()
            .skip(1)
            .take(max_lag)
            .filter(|r| r.abs() > self.ci)
            .count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lag", "rho", "ci"])?;
        for (h, r) in self.rho.iter().enumerate() {
            w.write_record([h.to_string(), r.to_string(), self.ci.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn check_finite(series: &[f64]) -> Result<()> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("series contains missing or non-finite values".into()));
    }
    Ok(())
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    if series.len() <= max_lag {
        return Err(Error::Length {
            needed: max_lag + 1,
            got: series.len(),
        });
    }
    check_finite(series)?;
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let rho = (0..=max_lag)
        .map(|h| {
            if h == 0 {
                1.0
            } else {
                dev.iter().zip(&dev[h..]).map(|(a, b)| a * b).sum::<f64>() / denom
            }
        })
        .collect();
    Ok(AcfResult {
        rho,
        ci: 1.96 / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    /// `n_bins + 1` equal-width edges spanning `[min, max]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `(standard normal quantile at (i − 0.5)/n, i-th smallest standardized value)`.
    pub qq: Vec<(f64, f64)>,
}

impl DistributionSummary {
    pub fn write_hist_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lower", "upper", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_qq_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theoretical", "sample"])?;
        for (t, s) in &self.qq {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn distribution_summary(series: &[f64], n_bins: usize) -> Result<DistributionSummary> {
    if series.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            got: series.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::Parameter("need at least one bin".into()));
    }
    check_finite(series)?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let sd = (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    if !(sd > 0.0) || lo == hi {
        return Err(Error::Degenerate("constant series".into()));
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; n_bins];
    for x in series {
        let b = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let mut z: Vec<f64> = series.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let qq = z
        .iter()
        .enumerate()
        .map(|(i, s)| (normal.inverse_cdf((i as f64 + 0.5) / n), *s))
        .collect();
    Ok(DistributionSummary { edges, counts, qq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn matrix(rows: usize, k: usize, f: impl Fn(usize, usize) -> f64) -> HorizonMatrix {
        let start = Utc.with_ymd_and_hms(2012, 5, 1, 0, 0, 0).unwrap();
        let mut m = HorizonMatrix::hourly(start, rows, k);
        for r in 0..rows {
            for h in 1..=k {
                m.set(r, h, f(r, h));
            }
        }
        m
    }

    #[test]
    fn zero_and_constant_residuals() {
        let c = rmse_per_horizon(&matrix(50, 42, |_, _| 0.0), 10).unwrap();
        assert!(c.rmse.iter().all(|r| *r == 0.0));
        let c = rmse_per_horizon(&matrix(50, 42, |_, _| -2.5), 10).unwrap();
        assert!(c.rmse.iter().all(|r| (*r - 2.5).abs() < 1e-15));
        assert_eq!(c.counts[0], 40);
    }

    #[test]
    fn hand_arithmetic() {
        let m = matrix(2, 1, |r, _| if r == 0 { 3.0 } else { 4.0 });
        let c = rmse_per_horizon(&m, 0).unwrap();
        assert!((c.rmse[0] - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn counts_drop_by_one_per_horizon() {
        let rows = 100;
        let m = matrix(rows, 42, |r, k| if r + k < rows { 1.0 } else { f64::NAN });
        let c = rmse_per_horizon(&m, 0).unwrap();
        for k in 1..=42 {
            assert_eq!(c.counts[k - 1], c.counts[0] - (k - 1));
            assert_eq!(c.excluded[k - 1], k);
        }
    }

    #[test]
    fn empty_after_cut() {
        assert!(matches!(
            rmse_per_horizon(&matrix(10, 2, |_, _| 1.0), 10),
            Err(Error::EmptyEvaluation)
        ));
    }

    #[test]
    fn order_of_issues_does_not_matter() {
        let start = Utc.with_ymd_and_hms(2012, 5, 1, 0, 0, 0).unwrap();
        let f = |r: usize, k: usize| ((r * 7 + k * 3) % 11) as f64 - 5.0;
        // Same rows in reverse order.
        let mut rev = HorizonMatrix::hourly(start, 60, 3);
        for r in 0..60 {
            for k in 1..=3 {
                rev.set(r, k, f(59 - r, k));
            }
        }
        let b = rmse_per_horizon(&rev, 0).unwrap();
        let full = rmse_per_horizon(&matrix(60, 3, f), 0).unwrap();
        for k in 0..3 {
            assert!((b.rmse[k] - full.rmse[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn acf_basics() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = acf(&alt, 3).unwrap();
        assert_eq!(r.rho[0], 1.0);
        assert!((r.rho[1] + 1.0).abs() <= 2.0 / 1000.0);
        assert!(matches!(acf(&[2.0; 10], 3), Err(Error::Degenerate(_))));
        assert!(acf(&[1.0, 2.0], 5).is_err());
    }

    #[test]
    fn white_noise_stays_in_band() {
        // Pooled over many sequences the in-band share is about 95%; allow
        // three binomial standard errors below it.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut inside, mut total) = (0usize, 0usize);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = acf(&x, 40).unwrap();
            inside += 40 - r.outside_band(40);
            total += 40;
        }
        let share = inside as f64 / total as f64;
        let se = (0.05 * 0.95 / total as f64).sqrt();
        assert!(share >= 0.95 - 3.0 * se, "{share}");
    }

    proptest! {
        #[test]
        fn acf_bounded_and_affine_invariant(
            x in proptest::collection::vec(-100.0f64..100.0, 20..80),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -50.0f64..50.0,
        ) {
            let Ok(r) = acf(&x, 10) else { return Ok(()) };
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let s = acf(&y, 10).unwrap();
            for (p, q) in r.rho.iter().zip(&s.rho) {
                prop_assert!(p.abs() <= 1.0 + 1e-12);
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn histogram_counts_sum_to_length(x in proptest::collection::vec(-1e3f64..1e3, 2..200), bins in 1usize..40) {
            if let Ok(d) = distribution_summary(&x, bins) {
                prop_assert_eq!(d.counts.iter().sum::<usize>(), x.len());
                prop_assert_eq!(d.qq.len(), x.len());
            }
        }
    }

    #[test]
    fn normal_sample_hugs_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = distribution_summary(&x, 30).unwrap();
        for (t, s) in &d.qq[500..9500] {
            assert!((t - s).abs() < 0.1, "{t} {s}");
        }
    }

    #[test]
    fn heavy_tails_bend_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t3 = StudentT::new(3.0).unwrap();
        let x: Vec<f64> = (0..10_000).map(|_| t3.sample(&mut rng)).collect();
        let d = distribution_summary(&x, 30).unwrap();
        let (t, s) = d.qq[d.qq.len() - 1];
        assert!(s > t, "upper tail {s} vs {t}");
        let (t, s) = d.qq[0];
        assert!(s < t, "lower tail {s} vs {t}");
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(distribution_summary(&[1.0; 20], 5), Err(Error::Degenerate(_))));
    }
}
