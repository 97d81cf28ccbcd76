use std::f64::consts::PI;

use crate::calendar::{CalendarContext, Timestamp};
use crate::linalg::dot;

pub const DEFAULT_HARMONICS: usize = 10;

/// Fourier diurnal curve with separate workday and weekend coefficients.
///
/// Row layout is four blocks of `n_har` entries: workday sine, workday
/// cosine, weekend sine, weekend cosine. Harmonic `i` has period `24 / i`
/// hours. The block that does not match the day type is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiurnalBasis {
    n_har: usize,
}

impl DiurnalBasis {
    pub fn new(n_har: usize) -> Self {
        assert!(n_har >= 1, "at least one harmonic is required");
        Self { n_har }
    }

    pub fn n_har(&self) -> usize {
        self.n_har
    }

    pub fn dim(&self) -> usize {
        4 * self.n_har
    }

    pub fn fill(&self, tod: f64, workday: bool, out: &mut [f64]) {
        let n = self.n_har;
        debug_assert_eq!(out.len(), 4 * n);
        out.fill(0.0);
        let offset = if workday { 0 } else { 2 * n };
        for i in 1..=n {
            let (s, c) = (tod * i as f64 * PI / 12.0).sin_cos();
            out[offset + i - 1] = s;
            out[offset + n + i - 1] = c;
        }
    }

    pub fn row(&self, t: Timestamp, ctx: &CalendarContext) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.fill(ctx.time_of_day(t), ctx.is_workday(t), &mut out);
        out
    }

    /// The curve value for the given coefficients.
    pub fn evaluate(&self, coefficients: &[f64], t: Timestamp, ctx: &CalendarContext) -> f64 {
        dot(&self.row(t, ctx), &coefficients[..self.dim()])
    }
}

pub fn diurnal_row(t: Timestamp, ctx: &CalendarContext, n_har: usize) -> Vec<f64> {
    DiurnalBasis::new(n_har).row(t, ctx)
}
