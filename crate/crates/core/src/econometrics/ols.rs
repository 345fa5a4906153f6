use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::EconError;

/// Relative size of an R diagonal below which a column counts as collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub df_resid: usize,
}

impl OlsFit {
    pub fn sigma(&self) -> f64 {
        (self.rss / self.df_resid as f64).sqrt()
    }
}

fn two_sided_t(t: f64, df: usize) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Least squares through a Householder QR of the design matrix.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit, EconError> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(EconError::Shape(format!("{p} columns but {} names", names.len())));
    }
    if y.len() != n {
        return Err(EconError::Shape(format!("{n} rows but target of length {}", y.len())));
    }
    if p == 0 {
        return Err(EconError::Shape("design has no columns".into()));
    }
    if n <= p {
        return Err(EconError::TooShort {
            what: "regression".into(),
            need: p + 1,
            got: n,
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(EconError::Shape("non-finite value in regression data".into()));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
        })
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(EconError::RankDeficient(collinear));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| EconError::RankDeficient(names.to_vec()))?;
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| EconError::RankDeficient(names.to_vec()))?;
    let mut std_errors = Vec::with_capacity(p);
    let mut t_values = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        // diag((RᵀR)⁻¹) = squared row norms of R⁻¹
        let se = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
        let t = if se > 0.0 {
            beta[j] / se
        } else if beta[j] == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY.copysign(beta[j])
        };
        std_errors.push(se);
        t_values.push(t);
        p_values.push(two_sided_t(t, df_resid));
    }
    Ok(OlsFit {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        residuals: residuals.iter().copied().collect(),
        rss,
        df_resid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub causal: bool,
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
}

/// Does x at `lags` add to y's own lags 1..=`own_lags` plus an intercept?
pub fn granger_test(x: &[f64], y: &[f64], lags: &[usize], own_lags: usize, alpha: f64) -> Result<GrangerResult, EconError> {
    if x.len() != y.len() {
        return Err(EconError::Shape(format!("granger inputs of lengths {} and {}", x.len(), y.len())));
    }
    if lags.is_empty() || lags.contains(&0) {
        return Err(EconError::Shape("granger lags must be non-empty and ≥ 1".into()));
    }
    let start = lags.iter().copied().max().unwrap_or(0).max(own_lags);
    let n = y.len().saturating_sub(start);
    let p_r = 1 + own_lags;
    let p_u = p_r + lags.len();
    if n <= p_u {
        return Err(EconError::TooShort {
            what: "granger test".into(),
            need: start + p_u + 1,
            got: y.len(),
        });
    }
    let rows = start..y.len();
    let target = DVector::from_iterator(n, rows.clone().map(|t| y[t]));
    let mut names = vec!["const".to_string()];
    names.extend((1..=own_lags).map(|k| format!("y_lag{k}")));
    let restricted = DMatrix::from_fn(n, p_r, |i, j| if j == 0 { 1.0 } else { y[start + i - j] });
    names.extend(lags.iter().map(|k| format!("x_lag{k}")));
    let unrestricted = DMatrix::from_fn(n, p_u, |i, j| {
        if j < p_r {
            restricted[(i, j)]
        } else {
            x[start + i - lags[j - p_r]]
        }
    });
    let fit_r = fit_ols(&restricted, &target, &names[..p_r])?;
    let fit_u = fit_ols(&unrestricted, &target, &names)?;
    let (df_num, df_den) = (lags.len(), n - p_u);
    let scale = fit_r.rss.max(target.norm_squared());
    let (f, p) = if fit_u.rss <= 1e-24 * scale {
        if fit_r.rss <= 1e-24 * scale {
            return Err(EconError::Degenerate("target is fit exactly by its own lags".into()));
        }
        (f64::INFINITY, 0.0)
    } else {
        let f = ((fit_r.rss - fit_u.rss).max(0.0) / df_num as f64) / (fit_u.rss / df_den as f64);
        let dist = FisherSnedecor::new(df_num as f64, df_den as f64).expect("positive degrees of freedom");
        (f, (1.0 - dist.cdf(f)).clamp(0.0, 1.0))
    };
    Ok(GrangerResult {
        causal: p < alpha,
        f_statistic: f,
        p_value: p,
        df_num,
        df_den,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    fn noise(seed: u64, stream: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(e: &[f64], phi: f64) -> Vec<f64> {
        let mut y = vec![0.0; e.len()];
        y[0] = e[0];
        for t in 1..e.len() {
            y[t] = phi * y[t - 1] + e[t];
        }
        y
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 2.0).collect();
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_iterator(10, xs.iter().map(|v| 2.0 * v + 3.0));
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
        assert!(fit.p_values.iter().all(|&p| p < 1e-10));
    }

    #[test]
    fn orthogonal_target() {
        // Columns: 1 and a centered ±1 pattern; y is orthogonal to both.
        let x = DMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else if i % 2 == 0 { 1.0 } else { -1.0 });
        let y = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        for (b, p) in fit.coefficients.iter().zip(&fit.p_values) {
            assert!(b.abs() < 1e-12);
            assert!((p - 1.0).abs() < 1e-9, "{p}");
        }
    }

    #[test]
    fn collinear_columns_named() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y = DVector::from_fn(6, |i, _| i as f64 + 0.1 * (i % 2) as f64);
        let nm = vec!["const".to_string(), "a".into(), "b".into()];
        match fit_ols(&x, &y, &nm) {
            Err(EconError::RankDeficient(cols)) => assert_eq!(cols, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
        let zero = DMatrix::from_fn(6, 2, |i, j| if j == 0 { i as f64 } else { 0.0 });
        assert!(matches!(fit_ols(&zero, &y, &names(2)), Err(EconError::RankDeficient(_))));
        let square = DMatrix::identity(3, 3);
        assert!(fit_ols(&square, &DVector::zeros(3), &names(3)).is_err());
    }

    #[test]
    fn standard_errors_match_textbook() {
        // Simple regression: se(slope) = σ / sqrt(Σ(x−x̄)²).
        let e = noise(5, 0, 40);
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let x = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_fn(40, |i, _| 1.0 + 0.5 * xs[i] + e[i]);
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        let mean = xs.iter().sum::<f64>() / 40.0;
        let sxx: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((fit.std_errors[1] - fit.sigma() / sxx.sqrt()).abs() < 1e-12);
        let t = fit.coefficients[1] / fit.std_errors[1];
        assert!((fit.t_values[1] - t).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_normal_equations(
            n in 4usize..=8,
            p in 1usize..=3,
            vals in proptest::collection::vec(-5.0f64..5.0, 8 * 4),
        ) {
            prop_assume!(n > p);
            let x = DMatrix::from_fn(n, p, |i, j| vals[i * p + j]);
            let y = DVector::from_fn(n, |i, _| vals[24 + i % 8]);
            let xtx = x.transpose() * &x;
            // Skip near-singular draws where the oracle itself is unreliable.
            let eig = xtx.clone().symmetric_eigenvalues();
            let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            prop_assume!(lo > 1e-3 * hi && lo > 1e-6);
            let oracle = xtx.lu().solve(&(x.transpose() * &y)).unwrap();
            let fit = fit_ols(&x, &y, &names(p)).unwrap();
            for j in 0..p {
                prop_assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-8);
            }
        }

        #[test]
        fn noiseless_recovery(beta in proptest::collection::vec(-10.0f64..10.0, 3), seed in 0u64..500) {
            let z = noise(seed, 0, 60);
            let x = DMatrix::from_fn(20, 3, |i, j| if j == 0 { 1.0 } else { z[i * 3 + j] });
            let y = &x * DVector::from_vec(beta.clone());
            let fit = fit_ols(&x, &y, &names(3)).unwrap();
            for j in 0..3 {
                prop_assert!((fit.coefficients[j] - beta[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn granger_detects_planted_cause() {
        let mut hits = 0;
        for seed in 0..100 {
            let x = noise(seed, 1, 500);
            let e = noise(seed, 2, 500);
            let mut y = vec![0.0; 500];
            for t in 1..500 {
                y[t] = 0.5 * y[t - 1] + 0.8 * x[t - 1] + e[t];
            }
            if granger_test(&x, &y, &[1], 1, 0.05).unwrap().causal {
                hits += 1;
            }
        }
        assert!(hits > 95, "{hits}");
    }

    #[test]
    fn granger_size_on_independent_ar1() {
        let reps = 1000;
        let rejected = (0..reps)
            .filter(|&s| {
                let x = ar1(&noise(s, 1, 1000), 0.5);
                let y = ar1(&noise(s, 2, 1000), 0.5);
                granger_test(&x, &y, &[1], 1, 0.05).unwrap().causal
            })
            .count();
        let rate = rejected as f64 / reps as f64;
        assert!((rate - 0.05).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn granger_perfect_predictor() {
        let x = noise(3, 1, 200);
        let mut y = vec![0.0];
        y.extend_from_slice(&x[..199]);
        let g = granger_test(&x, &y, &[1], 1, 0.05).unwrap();
        assert!(g.causal);
        assert_eq!(g.p_value, 0.0);
        assert!(g.f_statistic.is_infinite());
    }

    #[test]
    fn granger_degenerate_inputs() {
        let x = noise(3, 1, 50);
        assert!(granger_test(&x, &x[1..], &[1], 1, 0.05).is_err());
        assert!(granger_test(&x, &x, &[], 1, 0.05).is_err());
        assert!(granger_test(&x[..4], &x[..4], &[2], 2, 0.05).is_err());
        // Constant x duplicates the intercept.
        assert!(matches!(
            granger_test(&[1.0; 50], &x, &[1], 1, 0.05),
            Err(EconError::RankDeficient(_))
        ));
    }
}
