//! Offline spline first stage: load as a smooth function of filtered
//! temperature, fitted separately for the opening and closing regimes.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::basis::{quantile_knots, LowPassFilter, SplineBasis};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::series::HourlySeries;

use super::config::{ModelConfig, SplineLabels};
use super::regime::fixed_open;

const MAGIC: &str = "SPL1";
pub const MIN_REGIME_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpline {
    basis: SplineBasis,
    coefficients: Vec<f64>,
    samples: usize,
}

impl RegimeSpline {
    pub fn new(basis: SplineBasis, coefficients: Vec<f64>, samples: usize) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::Dimension {
                expected: basis.dim(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            basis,
            coefficients,
            samples,
        })
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn value(&self, x: f64) -> f64 {
        self.basis.evaluate(&self.coefficients, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineStage {
    pub open: RegimeSpline,
    pub close: RegimeSpline,
}

impl SplineStage {
    pub fn open_value(&self, filtered_temp: f64) -> f64 {
        self.open.value(filtered_temp)
    }

    pub fn close_value(&self, filtered_temp: f64) -> f64 {
        self.close.value(filtered_temp)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<spline stage>", e);
        writeln!(w, "{MAGIC}").map_err(io)?;
        for (name, s) in [("open", &self.open), ("close", &self.close)] {
            writeln!(w, "regime {name}").map_err(io)?;
            writeln!(w, "degree {}", s.basis.degree()).map_err(io)?;
            writeln!(w, "samples {}", s.samples).map_err(io)?;
            writeln!(w, "knots {}", join(s.basis.breakpoints())).map_err(io)?;
            writeln!(w, "coefficients {}", join(&s.coefficients)).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io("<spline stage>", e))?;
        let mut it = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
        if it.next() != Some(MAGIC) {
            return Err(Error::Format(format!("expected `{MAGIC}` header")));
        }
        let mut read_regime = |expected: &str| -> Result<RegimeSpline> {
            let mut field = |key: &str| -> Result<&str> {
                let line = it
                    .next()
                    .ok_or_else(|| Error::Format("truncated spline stage".into()))?;
                line.strip_prefix(key)
                    .filter(|rest| rest.is_empty() || rest.starts_with(' '))
                    .map(str::trim)
                    .ok_or_else(|| Error::Format(format!("expected `{key}`, found `{line}`")))
            };
            if field("regime")? != expected {
                return Err(Error::Format(format!("expected regime `{expected}`")));
            }
            let degree = field("degree")?
                .parse()
                .map_err(|_| Error::Format("bad degree".into()))?;
            let samples = field("samples")?
                .parse()
                .map_err(|_| Error::Format("bad sample count".into()))?;
            let knots = floats(field("knots")?)?;
            let coefficients = floats(field("coefficients")?)?;
            RegimeSpline::new(SplineBasis::clamped(degree, knots)?, coefficients, samples)
        };
        let open = read_regime("open")?;
        let close = read_regime("close")?;
        Ok(Self { open, close })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|v| v.parse().map_err(|_| Error::Format(format!("bad number `{v}`"))))
        .collect()
}

/// Fits the two regime splines by ordinary least squares. `regimes[i]` is 1
/// for opening hours. Hours where load or temperature is missing are skipped.
pub fn fit_spline_stage(
    load: &HourlySeries,
    filtered_temp: &HourlySeries,
    regimes: &[u8],
    degree: usize,
    n_interior: usize,
) -> Result<SplineStage> {
    if filtered_temp.len() != load.len() || filtered_temp.start() != load.start() {
        return Err(Error::Parameter("load and temperature are not co-registered".into()));
    }
    if regimes.len() != load.len() {
        return Err(Error::Dimension {
            expected: load.len(),
            got: regimes.len(),
        });
    }
    if degree == 0 || n_interior == 0 {
        return Err(Error::Parameter("spline degree and knot count must be positive".into()));
    }
    let fit = |label: u8, name: &'static str| -> Result<RegimeSpline> {
        let (x, y): (Vec<f64>, Vec<f64>) = load
            .values()
            .iter()
            .zip(filtered_temp.values())
            .zip(regimes)
            .filter(|((q, t), r)| **r == label && !q.is_nan() && !t.is_nan())
            .map(|((q, t), _)| (*t, *q))
            .unzip();
        if x.len() < MIN_REGIME_SAMPLES {
            return Err(Error::Fit {
                regime: name,
                message: format!("{} samples, need at least {MIN_REGIME_SAMPLES}", x.len()),
            });
        }
        let knots = quantile_knots(&x, n_interior).map_err(|e| Error::Fit {
            regime: name,
            message: e.to_string(),
        })?;
        let basis = SplineBasis::clamped(degree, knots).map_err(|e| Error::Fit {
            regime: name,
            message: e.to_string(),
        })?;
        let rows: Vec<Vec<f64>> = x.iter().map(|v| basis.row(*v)).collect();
        let beta = least_squares(rows.iter().map(Vec::as_slice).zip(y.iter().copied()), basis.dim())
            .ok_or_else(|| Error::Fit {
                regime: name,
                message: "rank-deficient design, a knot span holds no data".into(),
            })?;
        RegimeSpline::new(basis, beta, x.len())
    };
    Ok(SplineStage {
        open: fit(1, "open")?,
        close: fit(0, "close")?,
    })
}

/// Fits the stage from raw series using the configured labels and training
/// window. Temperature is filtered with horizon 1's coefficient. Predicted
/// labels are taken from `predicted` when the config asks for them.
pub fn fit_spline_stage_from_config(
    config: &ModelConfig,
    load: &HourlySeries,
    observed_temp: &HourlySeries,
    predicted: Option<&[u8]>,
) -> Result<SplineStage> {
    let ctx = config.calendar();
    let n = config
        .spline_training_hours
        .map_or(load.len(), |h| h.min(load.len()));
    let mut filter = LowPassFilter::new(config.a_ta_for(1))?;
    let filtered = hold_missing(&mut filter, &observed_temp.values()[..n]);
    let regimes: Vec<u8> = match (config.spline_labels, predicted) {
        (SplineLabels::Predicted, Some(p)) => p[..n].to_vec(),
        (SplineLabels::Predicted, None) => {
            return Err(Error::Config("predicted spline labels requested but none supplied".into()))
        }
        (SplineLabels::Fixed, _) => (0..n)
            .map(|i| u8::from(fixed_open(ctx.time_of_day(load.timestamp(i)), config)))
            .collect(),
    };
    let load = HourlySeries::new(load.start(), load.values()[..n].to_vec(), load.unit())?;
    let temp = HourlySeries::new(load.start(), filtered, observed_temp.unit())?;
    fit_spline_stage(&load, &temp, &regimes, config.spline_degree, config.spline_knots)
}

/// Filters `xs`, emitting `NaN` for missing inputs while keeping the state.
pub(crate) fn hold_missing(filter: &mut LowPassFilter, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| if x.is_nan() { f64::NAN } else { filter.step(*x) })
        .collect()
}
