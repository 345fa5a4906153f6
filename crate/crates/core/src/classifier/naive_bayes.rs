use serde::{Deserialize, Serialize};

use super::{argmax, class_index, Dataset};
use crate::ingest::Sentiment;

/// Variance floor as a fraction of the largest feature variance.
const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes over the dense projection of a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Maximum-likelihood variances plus `epsilon`.
    pub variances: [Vec<f64>; 2],
    pub epsilon: f64,
}

impl GaussianNb {
    /// Both classes must be present.
    pub fn fit(data: &Dataset) -> Self {
        let d = data.width;
        let mut n = [0.0f64; 2];
        let mut sum = [vec![0.0; d], vec![0.0; d]];
        let mut all_sum = vec![0.0; d];
        for (row, &label) in data.rows.iter().zip(&data.labels) {
            let c = class_index(label);
            n[c] += 1.0;
            for &(j, x) in row {
                sum[c][j as usize] += x;
                all_sum[j as usize] += x;
            }
        }
        let means = [0, 1].map(|c| sum[c].iter().map(|s| s / n[c]).collect::<Vec<_>>());
        let total = n[0] + n[1];
        let all_mean: Vec<f64> = all_sum.iter().map(|s| s / total).collect();

        // Squared deviations; absent entries are zeros.
        let mut ss = [vec![0.0; d], vec![0.0; d]];
        let mut all_ss = vec![0.0; d];
        for (row, &label) in data.rows.iter().zip(&data.labels) {
            let c = class_index(label);
            for &(j, x) in row {
                let j = j as usize;
                ss[c][j] += (x - means[c][j]).powi(2) - means[c][j].powi(2);
                all_ss[j] += (x - all_mean[j]).powi(2) - all_mean[j].powi(2);
            }
        }
        for j in 0..d {
            for c in 0..2 {
                ss[c][j] += n[c] * means[c][j].powi(2);
            }
            all_ss[j] += total * all_mean[j].powi(2);
        }
        let max_var = all_ss.iter().map(|s| s / total).fold(0.0, f64::max);
        let epsilon = VAR_SMOOTHING * if max_var > 0.0 { max_var } else { 1.0 };
        let variances = [0, 1].map(|c| ss[c].iter().map(|s| (s / n[c]).max(0.0) + epsilon).collect::<Vec<_>>());
        Self {
            log_priors: [(n[0] / total).ln(), (n[1] / total).ln()],
            means,
            variances,
            epsilon,
        }
    }

    pub fn log_joint(&self, row: &[(u32, f64)]) -> [f64; 2] {
        let mut out = self.log_priors;
        let mut k = 0;
        for j in 0..self.means[0].len() {
            let x = match row.get(k) {
                Some(&(col, v)) if col as usize == j => {
                    k += 1;
                    v
                }
                _ => 0.0,
            };
            for (c, o) in out.iter_mut().enumerate() {
                let var = self.variances[c][j];
                *o -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + (x - self.means[c][j]).powi(2) / (2.0 * var);
            }
        }
        out
    }

    pub fn predict(&self, row: &[(u32, f64)]) -> Sentiment {
        argmax(self.log_joint(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sentiment::{Bearish, Bullish};

    #[test]
    fn closed_form_parameters() {
        // Bullish: x ∈ {1, 3}; bearish: x ∈ {-2, 0(absent)}.
        let data = Dataset {
            rows: vec![vec![(0, 1.0)], vec![(0, 3.0)], vec![(0, -2.0)], vec![]],
            labels: vec![Bullish, Bullish, Bearish, Bearish],
            width: 1,
        };
        let nb = GaussianNb::fit(&data);
        assert_eq!(nb.means[0][0], 2.0);
        assert_eq!(nb.means[1][0], -1.0);
        // Population variance over all four points: mean 0.5, var 3.25.
        let eps = 1e-9 * 3.25;
        assert!((nb.epsilon - eps).abs() < 1e-20);
        assert!((nb.variances[0][0] - (1.0 + eps)).abs() < 1e-12);
        assert!((nb.variances[1][0] - (1.0 + eps)).abs() < 1e-12);
        assert_eq!(nb.log_priors, [0.5f64.ln(); 2]);

        let x = 1.5;
        let lj = nb.log_joint(&[(0, x)]);
        let density = |m: f64, v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v);
        assert!((lj[0] - (0.5f64.ln() + density(2.0, 1.0 + eps))).abs() < 1e-12);
        assert!((lj[1] - (0.5f64.ln() + density(-1.0, 1.0 + eps))).abs() < 1e-12);
        assert_eq!(nb.predict(&[(0, x)]), Bullish);
        assert_eq!(nb.predict(&[(0, -1.5)]), Bearish);
    }
}
