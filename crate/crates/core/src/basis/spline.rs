use crate::error::{Error, Result};

/// Clamped B-spline basis of a given polynomial degree.
///
/// Built from a nondecreasing breakpoint sequence whose first and last
/// entries are the boundary knots; those are repeated `degree + 1` times in
/// the full knot vector. The basis has `breakpoints - 1 + degree` functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn clamped(degree: usize, breakpoints: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Basis("degree must be at least 1".into()));
        }
        if breakpoints.iter().any(|z| !z.is_finite()) {
            return Err(Error::Basis("non-finite knot".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Basis("knots must be nondecreasing".into()));
        }
        let (lo, hi) = match (breakpoints.first(), breakpoints.last()) {
            (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
            _ => return Err(Error::Basis("fewer than 2 distinct knots".into())),
        };
        let interior = &breakpoints[1..breakpoints.len() - 1];
        if interior.iter().any(|z| *z == lo || *z == hi) {
            return Err(Error::Basis("interior knot coincides with a boundary".into()));
        }
        let mut knots = vec![lo; degree + 1];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            degree,
            breakpoints,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Index `s` with `knots[s] <= x < knots[s + 1]`, using the last
    /// nonempty span at the right boundary.
    fn span(&self, x: f64) -> usize {
        let n = self.dim();
        if x >= self.upper() {
            return n - 1;
        }
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Evaluates every basis function at `x` (clamped into the knot range)
    /// with the triangular Cox–de Boor recursion.
    pub fn fill(&self, x: f64, out: &mut [f64]) {
        let p = self.degree;
        debug_assert_eq!(out.len(), self.dim());
        let x = x.clamp(self.lower(), self.upper());
        let span = self.span(x);
        let mut local = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        local[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = local[r] / (right[r + 1] + left[j - r]);
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        out.fill(0.0);
        out[span - p..=span].copy_from_slice(&local);
    }

    pub fn row(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.fill(x, &mut out);
        out
    }

    pub fn evaluate(&self, coefficients: &[f64], x: f64) -> f64 {
        self.row(x).iter().zip(coefficients).map(|(b, c)| b * c).sum()
    }
}

pub fn spline_row(basis: &SplineBasis, x: f64) -> Vec<f64> {
    basis.row(x)
}

/// Linear-interpolation sample quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Breakpoints `[min, q_1, ..., q_n, max]` with interior knots at the
/// quantiles `j / (n + 1)`. Non-finite samples are ignored.
pub fn quantile_knots(data: &[f64], n_interior: usize) -> Result<Vec<f64>> {
    let mut sorted: Vec<f64> = data.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.len() <= n_interior {
        return Err(Error::Length {
            needed: n_interior + 1,
            got: sorted.len(),
        });
    }
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi <= lo {
        return Err(Error::Basis("data are all equal".into()));
    }
    let mut knots = Vec::with_capacity(n_interior + 2);
    knots.push(lo);
    for j in 1..=n_interior {
        knots.push(quantile(&sorted, j as f64 / (n_interior + 1) as f64));
    }
    knots.push(hi);
    Ok(knots)
}
