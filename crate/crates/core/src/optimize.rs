//! Per-horizon search for the forgetting factor and filter coefficient, and
//! the grid search for the noise-model forgetting factor.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::{map_range, Parallelism};
use crate::forecaster::{
    noise_fit_apply, run_horizon, ForecastInputs, ModelConfig, SplineStage, DEFAULT_A_TA, DEFAULT_LAMBDA,
};
use crate::series::HourlySeries;

pub const LAMBDA_LOWER: f64 = 0.9;
/// Largest filter coefficient the search will return.
pub const A_TA_UPPER: f64 = 0.999;
pub const SPREAD_TOLERANCE: f64 = 1e-5;
pub const MAX_EVALUATIONS: usize = 200;
const LAMBDA_STEP: f64 = 1.0;
const A_TA_STEP: f64 = 0.2;

/// λ lives on `(0.9, 1)` through a logistic map. `a_Ta` is clamped onto
/// `[0, A_TA_UPPER]`, so the lower bound is reachable exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds;

impl Bounds {
    pub fn to_params(z: &[f64]) -> (f64, f64) {
        let s = 1.0 / (1.0 + (-z[0]).exp());
        let lambda = (LAMBDA_LOWER + (1.0 - LAMBDA_LOWER) * s).min(1.0 - f64::EPSILON);
        (lambda.max(LAMBDA_LOWER + f64::EPSILON), z[1].clamp(0.0, A_TA_UPPER))
    }

    pub fn to_search(lambda: f64, a_ta: f64) -> [f64; 2] {
        let s = (lambda - LAMBDA_LOWER) / (1.0 - LAMBDA_LOWER);
        [(s / (1.0 - s)).ln(), a_ta]
    }

    pub fn contains(lambda: f64, a_ta: f64) -> bool {
        lambda > LAMBDA_LOWER && lambda < 1.0 && (0.0..=A_TA_UPPER).contains(&a_ta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimisation. Stops when the spread of objective values over
/// the simplex drops below `tolerance` or after `max_evals` evaluations, and
/// returns the best point seen. Non-finite values count as +∞.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    tolerance: f64,
    max_evals: usize,
) -> SimplexResult {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut converged = false;
    while simplex.len() == n + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread < tolerance {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                continue;
            }
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= max_evals {
                if fr < simplex[n].1 {
                    simplex[n] = (xr, fr);
                }
                continue;
            }
            // Outside contraction when the reflection helped at all.
            let xc = along(if fr < simplex[n].1 { 0.5 } else { -0.5 });
            let fc = eval(&xc, &mut evals);
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
    }
    let (x, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((x0.to_vec(), v0));
    SimplexResult {
        x,
        value,
        evaluations: evals,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonOptimum {
    pub horizon: usize,
    pub lambda: f64,
    pub a_ta: f64,
    pub rmse: f64,
    pub start_rmse: f64,
    pub evaluations: usize,
}

/// Minimises `objective(λ, a_Ta)` from `start`.
pub fn optimize_horizon(
    k: usize,
    mut objective: impl FnMut(f64, f64) -> f64,
    start: (f64, f64),
) -> Result<HorizonOptimum> {
    let (l0, a0) = start;
    if !Bounds::contains(l0, a0) {
        return Err(Error::Parameter(format!("start ({l0}, {a0}) outside the search bounds")));
    }
    let z0 = Bounds::to_search(l0, a0);
    let (l0, a0) = Bounds::to_params(&z0);
    let start_rmse = objective(l0, a0);
    if !start_rmse.is_finite() {
        return Err(Error::Objective);
    }
    let mut first = true;
    let result = nelder_mead(
        |z| {
            if first {
                first = false;
                return start_rmse;
            }
            let (l, a) = Bounds::to_params(z);
            objective(l, a)
        },
        &z0,
        &[LAMBDA_STEP, A_TA_STEP],
        SPREAD_TOLERANCE,
        MAX_EVALUATIONS,
    );
    let (lambda, a_ta) = Bounds::to_params(&result.x);
    Ok(HorizonOptimum {
        horizon: k,
        lambda,
        a_ta,
        rmse: result.value,
        start_rmse,
        evaluations: result.evaluations,
    })
}

/// RMSE of horizon `k` over issue indices from `burn_in_hours` on, for a
/// fresh replay at `(λ, a_Ta)`. Errors and empty windows give `NaN`.
pub fn replay_rmse(
    inputs: &ForecastInputs,
    config: &ModelConfig,
    spline: Option<&SplineStage>,
    k: usize,
    lambda: f64,
    a_ta: f64,
) -> f64 {
    let Ok(run) = run_horizon(inputs, config.kind, config.n_har, spline, k, lambda, a_ta) else {
        return f64::NAN;
    };
    let res = run.residuals(inputs.load());
    let (sum, n) = res
        .iter()
        .skip(config.burn_in_hours)
        .filter(|e| !e.is_nan())
        .fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub horizons: Vec<HorizonOptimum>,
}

impl OptimizationResult {
    /// Copies the optimised parameters into `config`.
    pub fn apply_to(&self, config: &mut ModelConfig) -> Result<()> {
        for h in &self.horizons {
            if h.horizon == 0 || h.horizon > config.lambda.len() {
                return Err(Error::Config(format!("horizon {} out of range", h.horizon)));
            }
            config.lambda[h.horizon - 1] = h.lambda;
            config.a_ta[h.horizon - 1] = h.a_ta;
        }
        config.validate()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["horizon", "lambda", "a_ta", "rmse", "evals"])?;
        for h in &self.horizons {
            w.write_record([
                h.horizon.to_string(),
                h.lambda.to_string(),
                h.a_ta.to_string(),
                h.rmse.to_string(),
                h.evaluations.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut horizons = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<&str> {
                rec.get(c).ok_or_else(|| Error::Parse {
                    row: i + 1,
                    message: "missing column".into(),
                })
            };
            let num = |c: usize| -> Result<f64> {
                field(c)?.parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("bad number in column {}", c + 1),
                })
            };
            horizons.push(HorizonOptimum {
                horizon: num(0)? as usize,
                lambda: num(1)?,
                a_ta: num(2)?,
                rmse: num(3)?,
                start_rmse: f64::NAN,
                evaluations: num(4)? as usize,
            });
        }
        Ok(Self { horizons })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Optimises each horizon in `horizons` independently by replaying it.
pub fn optimize_all(
    config: &ModelConfig,
    spline: Option<&SplineStage>,
    inputs: &ForecastInputs,
    horizons: &[usize],
    mode: Parallelism,
) -> Result<OptimizationResult> {
    let results = map_range(mode, 0..horizons.len(), |h| {
        let k = horizons[h];
        optimize_horizon(
            k,
            |l, a| replay_rmse(inputs, config, spline, k, l, a),
            (DEFAULT_LAMBDA, DEFAULT_A_TA),
        )
    });
    Ok(OptimizationResult {
        horizons: results.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: f64,
    /// `(λ, RMSE₁ after the noise model)` per grid point.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the noise-model λ with the smallest corrected RMSE₁; ties go to
/// the larger λ.
pub fn grid_search_noise_lambda(residuals: &HourlySeries, grid: &[f64]) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty λ grid".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(**l > LAMBDA_LOWER && **l < 1.0)) {
        return Err(Error::Parameter(format!("grid value {l} outside (0.9, 1)")));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let (clean, _) = noise_fit_apply(residuals, lambda)?;
        scores.push((lambda, rms(clean.values())));
    }
    let best = scores
        .iter()
        .copied()
        .reduce(|b, c| if c.1 < b.1 || (c.1 == b.1 && c.0 > b.0) { c } else { b })
        .map(|(l, _)| l)
        .unwrap_or(grid[0]);
    Ok(GridSearch { best, scores })
}

/// Evenly spaced grid `from, from + step, ..., to` (inclusive, rounded to
/// the step).
pub fn lambda_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

fn rms(v: &[f64]) -> f64 {
    let (s, n) = v
        .iter()
        .filter(|x| !x.is_nan())
        .fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n.max(1) as f64).sqrt()
}
