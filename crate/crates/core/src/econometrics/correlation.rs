use serde::{Deserialize, Serialize};

use super::EconError;

/// Two-sided 95% white-noise band half-width, 1.96/√n.
pub fn white_noise_band(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagCorrelation {
    pub lag: i64,
    pub correlation: f64,
    pub band: f64,
    pub significant: bool,
}

impl LagCorrelation {
    fn new(lag: i64, correlation: f64, band: f64) -> Self {
        Self {
            lag,
            correlation,
            band,
            significant: correlation.abs() > band,
        }
    }
}

fn deviations(v: &[f64], name: &str) -> Result<(Vec<f64>, f64), EconError> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let dev: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = dev.iter().map(|d| d * d).sum::<f64>();
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(EconError::ZeroVariance(name.into()));
    }
    Ok((dev, ss))
}

/// Σ_t a[t+k]·b[t] over the valid t, ascending.
fn cross_sum(a: &[f64], b: &[f64], k: i64) -> f64 {
    let n = a.len() as i64;
    let (lo, hi) = if k >= 0 { (0, n - k) } else { (-k, n) };
    (lo..hi).map(|t| a[(t + k) as usize] * b[t as usize]).sum()
}

/// Sample autocorrelations at lags 1..=max_lag.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<LagCorrelation>, EconError> {
    if values.len() <= max_lag + 2 {
        return Err(EconError::TooShort {
            what: "autocorrelation".into(),
            need: max_lag + 3,
            got: values.len(),
        });
    }
    let (dev, ss) = deviations(values, "series")?;
    let band = white_noise_band(values.len());
    Ok((1..=max_lag as i64)
        .map(|k| LagCorrelation::new(k, cross_sum(&dev, &dev, k) / ss, band))
        .collect())
}

/// Cross-correlation of `x` shifted by k against `y`, for k in
/// −max_lag..=max_lag. Negative k pairs x_{t+k} with y_t, so x leads y by |k|.
pub fn ccf(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<LagCorrelation>, EconError> {
    if x.len() != y.len() {
        return Err(EconError::Shape(format!("ccf of lengths {} and {}", x.len(), y.len())));
    }
    if x.len() <= max_lag + 2 {
        return Err(EconError::TooShort {
            what: "cross-correlation".into(),
            need: max_lag + 3,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let (dx, ssx) = deviations(x, "x")?;
    let (dy, ssy) = deviations(y, "y")?;
    let sx = (ssx / n).sqrt();
    let sy = (ssy / n).sqrt();
    let band = white_noise_band(x.len());
    let m = max_lag as i64;
    Ok((-m..=m)
        .map(|k| LagCorrelation::new(k, cross_sum(&dx, &dy, k) / n / (sx * sy), band))
        .collect())
}
