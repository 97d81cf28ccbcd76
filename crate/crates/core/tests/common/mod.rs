#![allow(dead_code)]

use loadcast::exec::Parallelism;
use loadcast::forecaster::{fit_spline_stage_from_config, ForecastInputs, ModelConfig, ModelKind, SplineStage};
use loadcast::rls::{RlsState, DEFAULT_PRIOR};
use loadcast::synth::{generate, Scenario, ScenarioConfig};
use loadcast::weather::{calibrate_nwp, NwpSchedule, DEFAULT_SPAN};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Direct solution of the exponentially weighted normal equations with the
/// same ridge prior the recursive estimator starts from.
pub fn batch_weighted_ls(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> DVector<f64> {
    let d = xs[0].len();
    let n = xs.len();
    let mut r = DMatrix::<f64>::identity(d, d) * (DEFAULT_PRIOR * lambda.powi(n as i32));
    let mut b = DVector::<f64>::zeros(d);
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        let w = lambda.powi((n - 1 - i) as i32);
        let x = DVector::from_column_slice(x);
        r += &x * x.transpose() * w;
        b += &x * (w * y);
    }
    r.cholesky().expect("weighted information matrix is positive definite").solve(&b)
}

pub struct Stream {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

pub fn random_stream(d: usize, n: usize, seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
    let truth: Vec<f64> = (0..d).map(|_| g()).collect();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| g()).collect();
        let y = x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.1 * g();
        xs.push(x);
        ys.push(y);
    }
    Stream { xs, ys }
}

pub fn recursive_fit(stream: &Stream, lambda: f64) -> RlsState {
    let mut s = RlsState::new(stream.xs[0].len(), lambda).unwrap();
    for (x, y) in stream.xs.iter().zip(&stream.ys) {
        s.update(x, *y).unwrap();
    }
    s
}

pub fn relative_error(a: &[f64], b: &DVector<f64>) -> f64 {
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.norm().max(f64::MIN_POSITIVE)
}

pub struct Prepared {
    pub scenario: Scenario,
    pub config: ModelConfig,
    pub inputs: ForecastInputs,
    pub spline: Option<SplineStage>,
}

/// Synthetic record, calibrated forecasts and replay inputs for `kind`.
pub fn prepare(scenario: &ScenarioConfig, kind: ModelKind) -> Prepared {
    let s = generate(scenario).unwrap();
    let config = ModelConfig {
        utc_offset_hours: scenario.utc_offset_hours,
        ..ModelConfig::with_kind(kind)
    };
    let nwp = calibrate_nwp(&s.nwp, &s.temp_obs, DEFAULT_SPAN).unwrap();
    let inputs =
        ForecastInputs::new(&config, &s.load, &s.temp_obs, &nwp, &NwpSchedule::default(), &config.calendar()).unwrap();
    let spline = (kind == ModelKind::VarNonlin)
        .then(|| fit_spline_stage_from_config(&config, &s.load, &s.temp_obs, None).unwrap());
    Prepared {
        scenario: s,
        config,
        inputs,
        spline,
    }
}

/// RMSE of `residuals` from index `skip` on, ignoring missing entries.
pub fn rmse_after(residuals: &[f64], skip: usize) -> f64 {
    let (s, n) = residuals
        .iter()
        .skip(skip)
        .filter(|e| !e.is_nan())
        .fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (s / n as f64).sqrt()
}

pub const SEQ: Parallelism = Parallelism::Sequential;
