//! Recursive least squares with exponential forgetting.
//!
//! The information matrix is propagated directly (`R <- λR + xxᵀ`) and the
//! coefficient step solves `R δ = x e` by Cholesky at every update. Data of
//! age `Δt` carries weight `λ^Δt`, and the initial ridge `δI` decays the same
//! way, so after `n` updates the state equals the weighted normal-equation
//! solution with prior `λⁿ δ I`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot};

pub const DEFAULT_PRIOR: f64 = 1e-3;
const REGULARIZATION: f64 = 1e-8;
const MAGIC: &str = "RLS1";

/// Weight `λ^Δt` of an observation that is `age_hours` old.
pub fn forgetting_weight(lambda: f64, age_hours: f64) -> f64 {
    lambda.powf(age_hours)
}

#[derive(Debug, Clone)]
pub struct RlsState {
    dim: usize,
    lambda: f64,
    r: Vec<f64>,
    theta: Vec<f64>,
    update_count: u64,
    next: Vec<f64>,
    factor: Vec<f64>,
}

impl RlsState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        Self::with_prior(dim, lambda, DEFAULT_PRIOR)
    }

    pub fn with_prior(dim: usize, lambda: f64, delta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("regressor dimension must be positive".into()));
        }
        check_lambda(lambda)?;
        if !(delta > 0.0) {
            return Err(Error::Parameter(format!("prior {delta} must be positive")));
        }
        let mut r = vec![0.0; dim * dim];
        for i in 0..dim {
            r[i * dim + i] = delta;
        }
        Ok(Self {
            dim,
            lambda,
            r,
            theta: vec![0.0; dim],
            update_count: 0,
            next: vec![0.0; dim * dim],
            factor: vec![0.0; dim * dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Row-major information matrix.
    pub fn information(&self) -> &[f64] {
        &self.r
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One step with the regressor that was known when the forecast for `y`
    /// was issued. The state is left untouched on error.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_dim(x)?;
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite regression data".into()));
        }
        let d = self.dim;
        let innovation = y - dot(x, &self.theta);
        for i in 0..d {
            let xi = x[i];
            let row = i * d;
            for j in 0..d {
                self.next[row + j] = self.lambda * self.r[row + j] + xi * x[j];
            }
        }
        self.factor.copy_from_slice(&self.next);
        if !cholesky_in_place(&mut self.factor, d, 0.0) {
            let trace: f64 = (0..d).map(|i| self.next[i * d + i]).sum();
            self.factor.copy_from_slice(&self.next);
            for i in 0..d {
                self.factor[i * d + i] += REGULARIZATION * trace;
            }
            if !cholesky_in_place(&mut self.factor, d, 0.0) {
                return Err(Error::Conditioning);
            }
        }
        let mut step: Vec<f64> = x.iter().map(|v| v * innovation).collect();
        cholesky_solve(&self.factor, d, &mut step);
        for (t, s) in self.theta.iter_mut().zip(&step) {
            *t += s;
        }
        std::mem::swap(&mut self.r, &mut self.next);
        self.update_count += 1;
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(dot(x, &self.theta))
    }

    /// Text dump: magic line, then dimension, λ, update count, `R` row by
    /// row and `θ`. Floats use shortest round-trip formatting.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<rls state>", e);
        writeln!(w, "{MAGIC}").map_err(io)?;
        writeln!(w, "dim {}", self.dim).map_err(io)?;
        writeln!(w, "lambda {}", self.lambda).map_err(io)?;
        writeln!(w, "update_count {}", self.update_count).map_err(io)?;
        for row in self.r.chunks(self.dim) {
            writeln!(w, "{}", join(row)).map_err(io)?;
        }
        writeln!(w, "{}", join(&self.theta)).map_err(io)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("truncated RLS state".into()))?
                .map_err(|e| Error::io("<rls state>", e))
        };
        if next()?.trim() != MAGIC {
            return Err(Error::Format(format!("expected `{MAGIC}` header")));
        }
        let dim: usize = keyed(&next()?, "dim")?;
        let lambda: f64 = keyed(&next()?, "lambda")?;
        let update_count: u64 = keyed(&next()?, "update_count")?;
        let mut state = Self::new(dim, lambda)?;
        for i in 0..dim {
            let row = floats(&next()?, dim)?;
            state.r[i * dim..(i + 1) * dim].copy_from_slice(&row);
        }
        state.theta = floats(&next()?, dim)?;
        state.update_count = update_count;
        Ok(state)
    }
}

impl PartialEq for RlsState {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.lambda == other.lambda
            && self.r == other.r
            && self.theta == other.theta
            && self.update_count == other.update_count
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.5 && lambda <= 1.0) {
        return Err(Error::Parameter(format!(
            "forgetting factor {lambda} outside (0.5, 1]"
        )));
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some(k), Some(v)) if k == key => v
            .parse()
            .map_err(|_| Error::Format(format!("bad value for `{key}`"))),
        _ => Err(Error::Format(format!("expected `{key} <value>`"))),
    }
}

fn floats(line: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = line
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format("bad float".into()))?;
    if v.len() != n {
        return Err(Error::Format(format!("expected {n} values, got {}", v.len())));
    }
    Ok(v)
}

pub fn rls_update(state: &mut RlsState, x_lagged: &[f64], y: f64) -> Result<()> {
    state.update(x_lagged, y)
}

pub fn rls_predict(state: &RlsState, x_now: &[f64]) -> Result<f64> {
    state.predict(x_now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn mean_of_two_observations() {
        let mut s = RlsState::new(1, 1.0).unwrap();
        s.update(&[1.0], 2.0).unwrap();
        s.update(&[1.0], 4.0).unwrap();
        // Prior 1e-3 pulls the mean towards zero by a factor 2/(2 + 1e-3).
        assert!((s.theta()[0] - 6.0 / 2.001).abs() < 1e-12);
        assert!((s.theta()[0] - 3.0).abs() < 2e-3);
        assert!((rls_predict(&s, &[1.0]).unwrap() - s.theta()[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_innovation_keeps_theta() {
        let mut s = RlsState::new(2, 0.9).unwrap();
        s.update(&[1.0, 2.0], 3.0).unwrap();
        let theta = s.theta().to_vec();
        let r = s.information().to_vec();
        let y = dot(&[0.5, -1.0], &theta);
        s.update(&[0.5, -1.0], y).unwrap();
        assert_eq!(s.theta(), theta.as_slice());
        assert_ne!(s.information(), r.as_slice());
        assert_eq!(s.update_count(), 2);
    }

    #[test]
    fn prediction_extracts_coordinates() {
        let s = RlsState::new(3, 1.0).unwrap();
        assert_eq!(s.predict(&[4.0, 5.0, 6.0]).unwrap(), 0.0);
        let mut s = s;
        s.theta = vec![1.5, -2.0, 7.0];
        assert_eq!(s.predict(&[0.0, 1.0, 0.0]).unwrap(), -2.0);
    }

    #[test]
    fn dimension_and_parameter_errors() {
        let mut s = RlsState::new(2, 0.99).unwrap();
        assert!(matches!(s.update(&[1.0], 1.0), Err(Error::Dimension { expected: 2, got: 1 })));
        assert!(matches!(s.predict(&[1.0, 2.0, 3.0]), Err(Error::Dimension { .. })));
        assert!(s.update(&[1.0, f64::NAN], 1.0).is_err());
        assert_eq!(s.update_count(), 0);
        assert!(RlsState::new(2, 0.5).is_err());
        assert!(RlsState::new(2, 1.01).is_err());
        assert!(RlsState::new(0, 0.9).is_err());
    }

    #[test]
    fn half_lives() {
        assert!((forgetting_weight(0.95, 13.0) - 0.5133).abs() < 1e-3);
        assert!((forgetting_weight(0.998, 346.0) - 0.5002).abs() < 1e-3);
        assert_eq!(forgetting_weight(1.0, 1e6), 1.0);
    }

    #[test]
    fn state_dump_round_trip() {
        let mut s = RlsState::new(3, 0.97).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            s.update(&x, rng.gen()).unwrap();
        }
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"RLS1\n"));
        let back = RlsState::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert!(RlsState::read_from("RLS0\n".as_bytes()).is_err());
    }

    #[test]
    fn repeated_regressor_still_solves() {
        // A rank-one stream leaves R singular once the prior has decayed.
        let mut s = RlsState::with_prior(2, 0.6, 1e-300).unwrap();
        for _ in 0..2000 {
            s.update(&[1.0, 1.0], 2.0).unwrap();
        }
        assert!((s.predict(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn information_stays_symmetric_psd(
            lambda in 0.9f64..=1.0,
            data in proptest::collection::vec((proptest::collection::vec(-3.0f64..3.0, 4), -5.0f64..5.0), 1..80)
        ) {
            let mut s = RlsState::new(4, lambda).unwrap();
            for (x, y) in &data {
                s.update(x, *y).unwrap();
                let r = s.information();
                for i in 0..4 {
                    for j in 0..4 {
                        prop_assert!((r[i * 4 + j] - r[j * 4 + i]).abs() <= 1e-10);
                    }
                }
                let trace: f64 = (0..4).map(|i| r[i * 4 + i]).sum();
                let mut f = r.to_vec();
                for i in 0..4 {
                    f[i * 4 + i] += 1e-9 * trace;
                }
                prop_assert!(cholesky_in_place(&mut f, 4, 0.0));
            }
        }
    }
}
