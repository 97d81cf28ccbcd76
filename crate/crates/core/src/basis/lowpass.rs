use crate::error::{Error, Result};

/// First-order low-pass filter with unit stationary gain,
/// `y_t = a y_{t-1} + (1 - a) x_t`.
///
/// Without prior state the first output equals the first input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassFilter {
    a: f64,
    state: Option<f64>,
}

impl LowPassFilter {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Parameter(format!(
                "filter coefficient {a} outside [0, 1)"
            )));
        }
        Ok(Self { a, state: None })
    }

    pub fn with_state(a: f64, state: f64) -> Result<Self> {
        let mut f = Self::new(a)?;
        f.state = Some(state);
        Ok(f)
    }

    pub fn coefficient(&self) -> f64 {
        self.a
    }

    pub fn state(&self) -> Option<f64> {
        self.state
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = match self.state {
            Some(prev) => self.a * prev + (1.0 - self.a) * x,
            None => x,
        };
        self.state = Some(y);
        y
    }

    pub fn apply(&mut self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|x| self.step(*x)).collect()
    }
}

pub fn lowpass_apply(filter: &mut LowPassFilter, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Length { needed: 1, got: 0 });
    }
    Ok(filter.apply(x))
}
