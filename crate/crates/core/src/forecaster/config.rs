use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::basis::DEFAULT_HARMONICS;
use crate::calendar::CalendarContext;
use crate::error::{Error, Result};
use crate::kv::parse_kv;

/// Forecast horizons 1..=42 hours.
pub const HORIZONS: usize = 42;
pub const DEFAULT_LAMBDA: f64 = 0.998;
pub const DEFAULT_A_TA: f64 = 0.6;
pub const DEFAULT_BURN_IN_HOURS: usize = 336;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Regimes switch at fixed local hours; temperature enters linearly.
    FixLin,
    /// Regimes predicted from an adaptive diurnal curve; linear temperature.
    VarLin,
    /// Predicted regimes with spline-transformed temperature.
    VarNonlin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::FixLin, ModelKind::VarLin, ModelKind::VarNonlin];

    pub fn uses_predicted_regime(self) -> bool {
        !matches!(self, ModelKind::FixLin)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FixLin => "fix_lin",
            ModelKind::VarLin => "var_lin",
            ModelKind::VarNonlin => "var_nonlin",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace(['-', '.'], "_").as_str() {
            "fix_lin" => Ok(ModelKind::FixLin),
            "var_lin" => Ok(ModelKind::VarLin),
            "var_nonlin" => Ok(ModelKind::VarNonlin),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

/// Which regime labels the offline spline stage is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineLabels {
    Fixed,
    Predicted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_har: usize,
    /// Forgetting factor per horizon, index `k - 1`.
    pub lambda: Vec<f64>,
    /// Low-pass coefficient per horizon, index `k - 1`.
    pub a_ta: Vec<f64>,
    pub open_hour: u32,
    pub close_hour: u32,
    pub burn_in_hours: usize,
    pub utc_offset_hours: i32,
    pub spline_degree: usize,
    pub spline_knots: usize,
    pub spline_labels: SplineLabels,
    /// Fit the spline stage on the leading hours only; `None` uses the whole
    /// record.
    pub spline_training_hours: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::VarNonlin,
            n_har: DEFAULT_HARMONICS,
            lambda: vec![DEFAULT_LAMBDA; HORIZONS],
            a_ta: vec![DEFAULT_A_TA; HORIZONS],
            open_hour: 8,
            close_hour: 21,
            burn_in_hours: DEFAULT_BURN_IN_HOURS,
            utc_offset_hours: 0,
            spline_degree: 3,
            spline_knots: 5,
            spline_labels: SplineLabels::Fixed,
            spline_training_hours: None,
        }
    }
}

impl ModelConfig {
    pub fn with_kind(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn lambda_for(&self, k: usize) -> f64 {
        self.lambda[k - 1]
    }

    pub fn a_ta_for(&self, k: usize) -> f64 {
        self.a_ta[k - 1]
    }

    pub fn calendar(&self) -> CalendarContext {
        CalendarContext::with_offset(self.utc_offset_hours)
    }

    /// Dimension of the main model's regressor.
    pub fn regressor_dim(&self) -> usize {
        4 * self.n_har + 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_har == 0 {
            return Err(Error::Config("n_har must be at least 1".into()));
        }
        if self.lambda.len() != HORIZONS || self.a_ta.len() != HORIZONS {
            return Err(Error::Config(format!("need {HORIZONS} per-horizon parameters")));
        }
        if let Some((k, l)) = self.lambda.iter().enumerate().find(|(_, l)| !(**l > 0.5 && **l <= 1.0)) {
            return Err(Error::Config(format!("lambda {l} for horizon {} outside (0.5, 1]", k + 1)));
        }
        if let Some((k, a)) = self.a_ta.iter().enumerate().find(|(_, a)| !(0.0..1.0).contains(*a)) {
            return Err(Error::Config(format!("a_ta {a} for horizon {} outside [0, 1)", k + 1)));
        }
        if !(self.open_hour < self.close_hour && self.close_hour < 24) {
            return Err(Error::Config(format!(
                "opening interval [{}, {}] must satisfy 0 <= open < close < 24",
                self.open_hour, self.close_hour
            )));
        }
        if self.spline_degree == 0 || self.spline_knots == 0 {
            return Err(Error::Config("spline degree and knot count must be positive".into()));
        }
        Ok(())
    }

    /// Parses flat `key = value` text. `lambda` and `a_ta` set every horizon;
    /// `lambda.K` and `a_ta.K` set horizon `K`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut overrides = Vec::new();
        for (key, value) in parse_kv(text)? {
            let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
            match key.as_str() {
                "kind" | "model" => cfg.kind = value.parse()?,
                "n_har" => cfg.n_har = value.parse().map_err(|_| bad())?,
                "lambda" => cfg.lambda = vec![value.parse().map_err(|_| bad())?; HORIZONS],
                "a_ta" => cfg.a_ta = vec![value.parse().map_err(|_| bad())?; HORIZONS],
                "open_hour" => cfg.open_hour = value.parse().map_err(|_| bad())?,
                "close_hour" => cfg.close_hour = value.parse().map_err(|_| bad())?,
                "burn_in_hours" => cfg.burn_in_hours = value.parse().map_err(|_| bad())?,
                "utc_offset_hours" => cfg.utc_offset_hours = value.parse().map_err(|_| bad())?,
                "spline_degree" => cfg.spline_degree = value.parse().map_err(|_| bad())?,
                "spline_knots" => cfg.spline_knots = value.parse().map_err(|_| bad())?,
                "spline_labels" => {
                    cfg.spline_labels = match value.as_str() {
                        "fixed" => SplineLabels::Fixed,
                        "predicted" => SplineLabels::Predicted,
                        _ => return Err(bad()),
                    }
                }
                "spline_training_hours" => {
                    let h: usize = value.parse().map_err(|_| bad())?;
                    cfg.spline_training_hours = (h > 0).then_some(h);
                }
                other => match other.split_once('.') {
                    Some((name @ ("lambda" | "a_ta"), k)) => {
                        let k: usize = k
                            .parse()
                            .ok()
                            .filter(|k| (1..=HORIZONS).contains(k))
                            .ok_or_else(|| Error::Config(format!("bad horizon in `{key}`")))?;
                        let v: f64 = value.parse().map_err(|_| bad())?;
                        overrides.push((name == "lambda", k, v));
                    }
                    _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                },
            }
        }
        for (is_lambda, k, v) in overrides {
            if is_lambda {
                cfg.lambda[k - 1] = v;
            } else {
                cfg.a_ta[k - 1] = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("kind", self.kind.to_string());
        line("n_har", self.n_har.to_string());
        line("open_hour", self.open_hour.to_string());
        line("close_hour", self.close_hour.to_string());
        line("burn_in_hours", self.burn_in_hours.to_string());
        line("utc_offset_hours", self.utc_offset_hours.to_string());
        line("spline_degree", self.spline_degree.to_string());
        line("spline_knots", self.spline_knots.to_string());
        line(
            "spline_labels",
            match self.spline_labels {
                SplineLabels::Fixed => "fixed".into(),
                SplineLabels::Predicted => "predicted".into(),
            },
        );
        line(
            "spline_training_hours",
            self.spline_training_hours.unwrap_or(0).to_string(),
        );
        for k in 1..=HORIZONS {
            line(&format!("lambda.{k}"), self.lambda_for(k).to_string());
        }
        for k in 1..=HORIZONS {
            line(&format!("a_ta.{k}"), self.a_ta_for(k).to_string());
        }
        s
    }
}
