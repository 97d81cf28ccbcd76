use crate::error::{Error, Result};

use super::config::ModelKind;
use super::spline_stage::SplineStage;

/// Writes `[diurnal, I, I·u, 1−I, (1−I)·v]` into `out`. For the linear
/// kinds `u = v = filtered_temp`; for `VarNonlin` they are the regime
/// spline values at `filtered_temp`.
pub fn build_regressor(
    kind: ModelKind,
    regime: u8,
    diurnal: &[f64],
    filtered_temp: f64,
    spline: Option<&SplineStage>,
    out: &mut Vec<f64>,
) -> Result<()> {
    let (u, v) = match (kind, spline) {
        (ModelKind::VarNonlin, Some(s)) => (s.open_value(filtered_temp), s.close_value(filtered_temp)),
        (ModelKind::VarNonlin, None) => {
            return Err(Error::Config("var_nonlin needs a fitted spline stage".into()))
        }
        (_, Some(_)) => {
            return Err(Error::Config(format!("{kind} does not take a spline stage")))
        }
        (_, None) => (filtered_temp, filtered_temp),
    };
    let open = f64::from(regime.min(1));
    out.clear();
    out.extend_from_slice(diurnal);
    out.extend_from_slice(&[open, open * u, 1.0 - open, (1.0 - open) * v]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DiurnalBasis;

    fn diurnal() -> Vec<f64> {
        let b = DiurnalBasis::new(10);
        let mut row = vec![0.0; b.dim()];
        b.fill(13.0, true, &mut row);
        row
    }

    #[test]
    fn open_regime_zeroes_closing_block() {
        let mut x = Vec::new();
        build_regressor(ModelKind::FixLin, 1, &diurnal(), 17.5, None, &mut x).unwrap();
        assert_eq!(x.len(), 44);
        assert_eq!(&x[40..], &[1.0, 17.5, 0.0, 0.0]);
        build_regressor(ModelKind::VarLin, 0, &diurnal(), 17.5, None, &mut x).unwrap();
        assert_eq!(&x[40..], &[0.0, 0.0, 1.0, 17.5]);
    }

    #[test]
    fn exactly_one_block_active() {
        let d = diurnal();
        let mut x = Vec::new();
        for regime in [0, 1] {
            for t in [-5.0, 0.0, 22.0] {
                build_regressor(ModelKind::FixLin, regime, &d, t, None, &mut x).unwrap();
                assert_eq!(x[40] + x[42], 1.0);
                assert_eq!(x[40] * x[42], 0.0);
                assert_eq!(x[40] * x[43], 0.0);
                assert_eq!(x[42] * x[41], 0.0);
            }
        }
    }

    #[test]
    fn nonlinear_needs_spline() {
        let mut x = Vec::new();
        let err = build_regressor(ModelKind::VarNonlin, 1, &diurnal(), 10.0, None, &mut x).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
