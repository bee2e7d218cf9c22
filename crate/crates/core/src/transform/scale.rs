use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    MinMax,
    Standard,
    Robust,
}

/// Fitted location/spread pair.
///
/// * minmax: `a` = min, `b` = max
/// * standard: `a` = mean, `b` = population std
/// * robust: `a` = median, `b` = IQR
///
/// A zero spread marks a constant column; applying it yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub a: f64,
    pub b: f64,
}

impl ScalerParams {
    fn spread(&self) -> f64 {
        match self.kind {
            ScalerKind::MinMax => self.b - self.a,
            ScalerKind::Standard | ScalerKind::Robust => self.b,
        }
    }
}

/// Quantile by linear interpolation at position `(n - 1) * q` of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(quantile_sorted(&s, 0.5))
}

/// Fits a scaler on the present (non-`None`) training values.
pub fn fit_scaler(values: &[Option<f64>], kind: ScalerKind) -> Result<ScalerParams> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::invalid("empty column"));
    }
    if present.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in column"));
    }
    let n = present.len() as f64;
    let (a, b) = match kind {
        ScalerKind::MinMax => {
            let min = present.iter().copied().fold(f64::INFINITY, f64::min);
            let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (min, max)
        }
        ScalerKind::Standard => {
            let mean = present.iter().sum::<f64>() / n;
            let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        ScalerKind::Robust => {
            present.sort_by(f64::total_cmp);
            let med = quantile_sorted(&present, 0.5);
            let iqr = quantile_sorted(&present, 0.75) - quantile_sorted(&present, 0.25);
            (med, iqr)
        }
    };
    let b = if b.is_finite() { b } else { 0.0 };
    Ok(ScalerParams { kind, a, b })
}

pub fn apply_scaler(v: f64, p: &ScalerParams) -> f64 {
    let spread = p.spread();
    if spread == 0.0 {
        return 0.0;
    }
    (v - p.a) / spread
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|x| Some(*x)).collect()
    }

    #[test]
    fn fitted_values() {
        let p = fit_scaler(&some(&[0.0, 5.0, 10.0]), ScalerKind::MinMax).unwrap();
        assert_eq!((p.a, p.b), (0.0, 10.0));
        assert_eq!(apply_scaler(5.0, &p), 0.5);

        let p = fit_scaler(&some(&[2.0, 4.0, 6.0]), ScalerKind::Standard).unwrap();
        assert_eq!(p.a, 4.0);
        assert!((p.b - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((p.b - 1.63299).abs() < 1e-5);

        let p = fit_scaler(&some(&[1.0, 2.0, 3.0, 4.0, 100.0]), ScalerKind::Robust).unwrap();
        assert_eq!((p.a, p.b), (3.0, 2.0));
        assert_eq!(apply_scaler(100.0, &p), 48.5);
    }

    #[test]
    fn degenerate_and_empty() {
        for kind in [ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::Robust] {
            let p = fit_scaler(&some(&[7.0, 7.0]), kind).unwrap();
            assert_eq!(apply_scaler(123.0, &p), 0.0);
        }
        assert!(fit_scaler(&[None, None], ScalerKind::Standard).is_err());
        let p = fit_scaler(&[None, Some(1.0), Some(3.0)], ScalerKind::MinMax).unwrap();
        assert_eq!((p.a, p.b), (1.0, 3.0));
    }

    #[test]
    fn interpolated_quantile() {
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn minmax_in_unit_interval(v in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let p = fit_scaler(&some(&v), ScalerKind::MinMax).unwrap();
            for x in &v {
                let s = apply_scaler(*x, &p);
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn standard_moments(v in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            let p = fit_scaler(&some(&v), ScalerKind::Standard).unwrap();
            prop_assume!(p.b > 1e-6);
            let s: Vec<f64> = v.iter().map(|x| apply_scaler(*x, &p)).collect();
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() <= 1e-9);
        }
    }
}
