use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::correlation::{acf, ccf};
use super::ols::{fit_ols, granger_test, GrangerResult, OlsFit};
use super::series::Series;
use super::EconError;

pub const DEFAULT_MAX_LAG: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;
pub const WHITENESS_LAGS: usize = 10;
pub const INTERCEPT: &str = "const";

/// Adjustment of the Granger level across all screened (candidate, lag) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    #[default]
    Bonferroni,
}

impl Correction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Bonferroni => "bonferroni",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "bonferroni" => Ok(Self::Bonferroni),
            _ => Err(format!("unknown correction {s:?} (expected none or bonferroni)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub max_lag: usize,
    pub alpha: f64,
    pub correction: Correction,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            max_lag: DEFAULT_MAX_LAG,
            alpha: DEFAULT_ALPHA,
            correction: Correction::default(),
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), EconError> {
        if self.max_lag == 0 {
            return Err(EconError::Config("max_lag must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EconError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub std_error: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub series: String,
    pub lag: usize,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFlag {
    /// No lag of the target was significant; the model is its mean.
    InterceptOnly,
    NoCandidateSurvivedScreening,
    AllInsertionsRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub target: String,
    pub intercept: Option<Coefficient>,
    pub terms: Vec<Term>,
    pub residual_sd: f64,
    pub residuals_white: bool,
    pub n_obs: usize,
    #[serde(default)]
    pub flags: Vec<ModelFlag>,
}

impl RegressionModel {
    pub fn intercept_value(&self) -> f64 {
        self.intercept.map_or(0.0, |c| c.value)
    }

    pub fn has_flag(&self, f: ModelFlag) -> bool {
        self.flags.contains(&f)
    }

    /// Candidate series used beyond the target's own lags.
    pub fn external_series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .terms
            .iter()
            .filter(|t| t.series != self.target)
            .map(|t| t.series.as_str())
            .collect();
        out.dedup();
        out
    }

    /// Same regressors (ignoring fitted values) as `other`.
    pub fn same_structure(&self, other: &Self) -> bool {
        let key = |m: &Self| {
            let mut k: Vec<(String, usize)> = m.terms.iter().map(|t| (t.series.clone(), t.lag)).collect();
            k.sort();
            (m.intercept.is_some(), k)
        };
        key(self) == key(other)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, EconError> {
        serde_json::from_str(s).map_err(|e| EconError::Format(e.to_string()))
    }
}

/// Values up to and including t−1, keyed by series name. The last element of
/// each vector is lag 1.
pub type History = HashMap<String, Vec<f64>>;

pub fn predict_one_step(model: &RegressionModel, history: &History) -> Result<f64, EconError> {
    let mut y = model.intercept_value();
    for term in &model.terms {
        let missing = || EconError::MissingHistory {
            series: term.series.clone(),
            lag: term.lag,
        };
        let h = history.get(&term.series).ok_or_else(missing)?;
        if term.lag == 0 || term.lag > h.len() {
            return Err(missing());
        }
        y += term.coefficient * h[h.len() - term.lag];
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Regressor {
    Intercept,
    Lag(usize, usize),
}

struct Design<'a> {
    names: Vec<&'a str>,
    values: Vec<&'a [f64]>,
    target: usize,
    start: usize,
}

impl<'a> Design<'a> {
    fn n(&self) -> usize {
        self.values[self.target].len() - self.start
    }

    fn column_name(&self, r: Regressor) -> String {
        match r {
            Regressor::Intercept => INTERCEPT.into(),
            Regressor::Lag(s, k) => format!("{}_lag{k}", self.names[s]),
        }
    }

    fn fit(&self, regs: &[Regressor]) -> Result<OlsFit, EconError> {
        let n = self.n();
        let x = DMatrix::from_fn(n, regs.len(), |i, j| match regs[j] {
            Regressor::Intercept => 1.0,
            Regressor::Lag(s, k) => self.values[s][self.start + i - k],
        });
        let y = DVector::from_iterator(n, self.values[self.target][self.start..].iter().copied());
        let names: Vec<String> = regs.iter().map(|&r| self.column_name(r)).collect();
        fit_ols(&x, &y, &names)
    }

    fn model(&self, regs: &[Regressor], fit: &OlsFit, flags: Vec<ModelFlag>) -> RegressionModel {
        let mut intercept = None;
        let mut terms = Vec::new();
        for (j, &r) in regs.iter().enumerate() {
            match r {
                Regressor::Intercept => {
                    intercept = Some(Coefficient {
                        value: fit.coefficients[j],
                        std_error: fit.std_errors[j],
                        p_value: fit.p_values[j],
                    })
                }
                Regressor::Lag(s, k) => terms.push(Term {
                    series: self.names[s].to_string(),
                    lag: k,
                    coefficient: fit.coefficients[j],
                    std_error: fit.std_errors[j],
                    p_value: fit.p_values[j],
                }),
            }
        }
        RegressionModel {
            target: self.names[self.target].to_string(),
            intercept,
            terms,
            residual_sd: fit.sigma(),
            residuals_white: residuals_white(&fit.residuals),
            n_obs: fit.residuals.len(),
            flags,
        }
    }

    fn regressors_of(&self, model: &RegressionModel) -> Result<Vec<Regressor>, EconError> {
        let mut regs = Vec::new();
        if model.intercept.is_some() {
            regs.push(Regressor::Intercept);
        }
        for t in &model.terms {
            let s = self
                .names
                .iter()
                .position(|n| *n == t.series)
                .ok_or_else(|| EconError::Shape(format!("model refers to unknown series {}", t.series)))?;
            regs.push(Regressor::Lag(s, t.lag));
        }
        Ok(regs)
    }
}

/// All residual autocorrelations at lags 1..=10 inside the white-noise band.
pub fn residuals_white(residuals: &[f64]) -> bool {
    let lags = WHITENESS_LAGS.min(residuals.len().saturating_sub(3));
    if lags == 0 {
        return true;
    }
    match acf(residuals, lags) {
        Ok(r) => r.iter().all(|c| !c.significant),
        Err(EconError::ZeroVariance(_)) => true,
        Err(_) => false,
    }
}

/// Backward elimination: drop the least significant non-protected regressor
/// with p ≥ alpha and refit until none is left.
fn eliminate(
    design: &Design,
    mut regs: Vec<Regressor>,
    protected: &[Regressor],
    alpha: f64,
) -> Result<Option<(Vec<Regressor>, OlsFit)>, EconError> {
    loop {
        if regs.is_empty() {
            return Ok(None);
        }
        let fit = design.fit(&regs)?;
        let worst = regs
            .iter()
            .enumerate()
            .filter(|(_, r)| !protected.contains(r))
            .filter(|(j, _)| !(fit.p_values[*j] < alpha))
            .max_by(|a, b| fit.p_values[a.0].total_cmp(&fit.p_values[b.0]).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j);
        match worst {
            Some(j) => {
                regs.remove(j);
            }
            None => return Ok(Some((regs, fit))),
        }
    }
}

fn check_length(n: usize, params: &SelectionParams) -> Result<(), EconError> {
    let need = 2 * params.max_lag + 5;
    if n < need {
        return Err(EconError::TooShort {
            what: "model selection".into(),
            need,
            got: n,
        });
    }
    Ok(())
}

fn intercept_only(design: &Design) -> Result<RegressionModel, EconError> {
    let regs = [Regressor::Intercept];
    let fit = design.fit(&regs)?;
    Ok(design.model(&regs, &fit, vec![ModelFlag::InterceptOnly]))
}

/// Autoregressive baseline on the target's ACF-significant lags. All fits
/// share the sample that starts at `max_lag`.
pub fn fit_m0(target: &Series, params: &SelectionParams) -> Result<RegressionModel, EconError> {
    params.validate()?;
    check_length(target.len(), params)?;
    let design = Design {
        names: vec![target.name.as_str()],
        values: vec![target.values.as_slice()],
        target: 0,
        start: params.max_lag,
    };
    let lags: Vec<usize> = match acf(&target.values, params.max_lag) {
        Ok(r) => r.iter().filter(|c| c.significant).map(|c| c.lag as usize).collect(),
        Err(EconError::ZeroVariance(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    if lags.is_empty() {
        return intercept_only(&design);
    }
    let mut regs = vec![Regressor::Intercept];
    regs.extend(lags.into_iter().map(|k| Regressor::Lag(0, k)));
    match eliminate(&design, regs, &[], params.alpha)? {
        Some((regs, fit)) if regs.iter().any(|r| matches!(r, Regressor::Lag(..))) => {
            Ok(design.model(&regs, &fit, Vec::new()))
        }
        _ => intercept_only(&design),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagScreen {
    pub lag: usize,
    pub ccf: f64,
    pub granger: GrangerResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScreen {
    pub candidate: String,
    /// Leading lags whose CCF lies outside the band, with their Granger tests.
    pub screened: Vec<LagScreen>,
    /// Level each Granger test was judged at.
    pub granger_alpha: f64,
}

impl CandidateScreen {
    pub fn surviving_lags(&self) -> Vec<usize> {
        self.screened.iter().filter(|l| l.granger.causal).map(|l| l.lag).collect()
    }

    /// Largest |CCF| over the surviving lags.
    pub fn strength(&self) -> f64 {
        self.screened
            .iter()
            .filter(|l| l.granger.causal)
            .map(|l| l.ccf.abs())
            .fold(0.0, f64::max)
    }
}

fn check_candidates(target: &Series, candidates: &[Series]) -> Result<(), EconError> {
    for c in candidates {
        if c.name == target.name || c.name == INTERCEPT {
            return Err(EconError::Config(format!("candidate name {:?} is reserved", c.name)));
        }
        if c.dates != target.dates {
            return Err(EconError::Shape(format!("candidate {} is not aligned with {}", c.name, target.name)));
        }
    }
    Ok(())
}

/// CCF screen where the candidate leads, then a per-lag Granger test at the
/// (possibly corrected) level.
pub fn screen_candidates(
    target: &Series,
    candidates: &[Series],
    params: &SelectionParams,
) -> Result<Vec<CandidateScreen>, EconError> {
    params.validate()?;
    check_candidates(target, candidates)?;
    let m = (candidates.len() * params.max_lag).max(1);
    let granger_alpha = match params.correction {
        Correction::None => params.alpha,
        Correction::Bonferroni => params.alpha / m as f64,
    };
    candidates
        .iter()
        .map(|c| {
            let corr = match ccf(&c.values, &target.values, params.max_lag) {
                Ok(v) => v,
                // A flat candidate carries no information.
                Err(EconError::ZeroVariance(_)) => Vec::new(),
                Err(e) => return Err(e),
            };
            let mut screened = Vec::new();
            for r in corr.iter().filter(|r| r.lag < 0 && r.significant) {
                let lag = r.lag.unsigned_abs() as usize;
                let g = granger_test(&c.values, &target.values, &[lag], lag, granger_alpha);
                let granger = match g {
                    Ok(g) => g,
                    Err(EconError::RankDeficient(_) | EconError::Degenerate(_)) => continue,
                    Err(e) => return Err(e),
                };
                screened.push(LagScreen { lag, ccf: r.correlation, granger });
            }
            Ok(CandidateScreen {
                candidate: c.name.clone(),
                screened,
                granger_alpha,
            })
        })
        .collect()
}

/// Extends `m0` with Granger-causal candidates in descending |CCF| order.
/// An insertion is undone when it leaves none of its own lags significant or
/// pushes a previously inserted candidate's term to p ≥ alpha.
pub fn build_m1(
    m0: &RegressionModel,
    target: &Series,
    candidates: &[Series],
    params: &SelectionParams,
) -> Result<RegressionModel, EconError> {
    check_length(target.len(), params)?;
    if m0.target != target.name {
        return Err(EconError::Config(format!("baseline models {} but target is {}", m0.target, target.name)));
    }
    let screens = screen_candidates(target, candidates, params)?;
    let mut order: Vec<(usize, &CandidateScreen)> =
        screens.iter().enumerate().filter(|(_, s)| !s.surviving_lags().is_empty()).collect();
    let unchanged = |flag| {
        let mut m = m0.clone();
        m.flags.retain(|f| *f == ModelFlag::InterceptOnly);
        m.flags.push(flag);
        m
    };
    if order.is_empty() {
        return Ok(unchanged(ModelFlag::NoCandidateSurvivedScreening));
    }
    order.sort_by(|a, b| b.1.strength().total_cmp(&a.1.strength()).then(a.0.cmp(&b.0)));

    let mut names = vec![target.name.as_str()];
    let mut values = vec![target.values.as_slice()];
    for c in candidates {
        names.push(&c.name);
        values.push(&c.values);
    }
    let design = Design {
        names,
        values,
        target: 0,
        start: params.max_lag,
    };
    let mut current = design.regressors_of(m0)?;
    let mut accepted: Vec<Regressor> = Vec::new();
    let mut best: Option<(Vec<Regressor>, OlsFit)> = None;
    for (idx, screen) in order {
        let series = idx + 1;
        let new: Vec<Regressor> = screen.surviving_lags().into_iter().map(|k| Regressor::Lag(series, k)).collect();
        let mut trial = current.clone();
        if !trial.contains(&Regressor::Intercept) {
            trial.insert(0, Regressor::Intercept);
        }
        trial.extend(new.iter().copied());
        let Ok(Some((regs, fit))) = eliminate(&design, trial, &accepted, params.alpha) else {
            continue;
        };
        if !regs.iter().any(|r| new.contains(r)) {
            continue;
        }
        let undo = accepted.iter().any(|a| {
            let j = regs.iter().position(|r| r == a).expect("protected regressors stay");
            !(fit.p_values[j] < params.alpha)
        });
        if undo {
            continue;
        }
        accepted.extend(regs.iter().filter(|r| new.contains(r)).copied());
        current = regs.clone();
        best = Some((regs, fit));
    }
    match best {
        Some((regs, fit)) => Ok(design.model(&regs, &fit, Vec::new())),
        None => Ok(unchanged(ModelFlag::AllInsertionsRejected)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub date: chrono::NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Percent.
    pub mape: f64,
    pub direction_accuracy: f64,
    pub n_test: usize,
    /// Test points left out of MAPE because the true value is 0.
    pub mape_skipped: usize,
    pub points: Vec<PredictionPoint>,
}

/// Mean of |(y − ŷ)/y|·100 over the points with y ≠ 0, and the number of
/// skipped points.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize), EconError> {
    if actual.len() != predicted.len() {
        return Err(EconError::Shape("one prediction per actual value".into()));
    }
    let (mut sum, mut used) = (0.0, 0usize);
    for (&y, &p) in actual.iter().zip(predicted) {
        if y != 0.0 {
            sum += ((y - p) / y).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(EconError::TooShort {
            what: "MAPE (non-zero actual values)".into(),
            need: 1,
            got: 0,
        });
    }
    Ok((100.0 * sum / used as f64, actual.len() - used))
}

/// Fraction of consecutive pairs whose predicted change and true change have
/// a strictly positive product.
pub fn direction_accuracy(actual: &[f64], predicted: &[f64]) -> Result<f64, EconError> {
    if actual.len() != predicted.len() {
        return Err(EconError::Shape("one prediction per actual value".into()));
    }
    if actual.len() < 2 {
        return Err(EconError::TooShort {
            what: "direction accuracy".into(),
            need: 2,
            got: actual.len(),
        });
    }
    let hits = (1..actual.len())
        .filter(|&t| (predicted[t] - predicted[t - 1]) * (actual[t] - actual[t - 1]) > 0.0)
        .count();
    Ok(hits as f64 / (actual.len() - 1) as f64)
}

/// Number of leading points used for fitting.
pub fn train_len(n: usize, train_fraction: f64) -> usize {
    (n as f64 * train_fraction).floor() as usize
}

/// Rolling one-step predictions over the chronological tail after
/// `train_fraction` of the points; each uses the true history up to t−1.
pub fn evaluate(
    model: &RegressionModel,
    train_fraction: f64,
    target: &Series,
    candidates: &[Series],
) -> Result<EvalReport, EconError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EconError::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    check_candidates(target, candidates)?;
    let n = target.len();
    let start = train_len(n, train_fraction);
    if n - start < 2 {
        return Err(EconError::TooShort {
            what: "test segment".into(),
            need: 2,
            got: n - start,
        });
    }
    let mut all: Vec<&Series> = vec![target];
    all.extend(candidates);
    let mut points = Vec::with_capacity(n - start);
    for t in start..n {
        let history: History = all.iter().map(|s| (s.name.clone(), s.values[..t].to_vec())).collect();
        points.push(PredictionPoint {
            date: target.dates[t],
            actual: target.values[t],
            predicted: predict_one_step(model, &history)?,
        });
    }
    let actual: Vec<f64> = points.iter().map(|p| p.actual).collect();
    let predicted: Vec<f64> = points.iter().map(|p| p.predicted).collect();
    let (mape, mape_skipped) = mape(&actual, &predicted)?;
    Ok(EvalReport {
        mape,
        direction_accuracy: direction_accuracy(&actual, &predicted)?,
        n_test: points.len(),
        mape_skipped,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n).map(|i| d0 + chrono::Days::new(i as u64)).collect()
    }

    fn series(name: &str, v: Vec<f64>) -> Series {
        Series::new(name, dates(v.len()), v).unwrap()
    }

    fn noise(seed: u64, stream: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let e = noise(seed, 0, n + 50);
        let mut y = vec![0.0; n + 50];
        for t in 1..y.len() {
            y[t] = phi * y[t - 1] + e[t];
        }
        y.split_off(50)
    }

    fn model(intercept: Option<f64>, terms: &[(&str, usize, f64)]) -> RegressionModel {
        RegressionModel {
            target: "y".into(),
            intercept: intercept.map(|value| Coefficient {
                value,
                std_error: 0.0,
                p_value: 0.0,
            }),
            terms: terms
                .iter()
                .map(|&(s, lag, c)| Term {
                    series: s.into(),
                    lag,
                    coefficient: c,
                    std_error: 0.0,
                    p_value: 0.0,
                })
                .collect(),
            residual_sd: 0.0,
            residuals_white: true,
            n_obs: 0,
            flags: Vec::new(),
        }
    }

    fn hist(pairs: &[(&str, &[f64])]) -> History {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn fitted_form_predictions() {
        let m = model(None, &[("close", 1, 0.9868)]);
        let p = predict_one_step(&m, &hist(&[("close", &[1000.0])])).unwrap();
        assert!((p - 986.8).abs() < 1e-9);

        let m = model(None, &[("close", 1, 0.9566), ("countWithLikes", 1, 0.2856)]);
        let p = predict_one_step(&m, &hist(&[("close", &[990.0, 1000.0]), ("countWithLikes", &[7.0, 40.0])])).unwrap();
        assert!((p - (0.9566 * 1000.0 + 0.2856 * 40.0)).abs() < 1e-9);

        let m = model(None, &[("return", 1, 0.3821)]);
        let p = predict_one_step(&m, &hist(&[("return", &[0.01])])).unwrap();
        assert!((p - 0.003821).abs() < 1e-15);

        // Index4 enters at lag 5, so its sixth-from-last value is irrelevant.
        let m = model(None, &[("countWithLikes", 1, 0.0002), ("Index4", 5, -0.0014)]);
        let idx4 = [9.0, 0.6, 0.1, 0.2, 0.3, 0.4];
        let p = predict_one_step(&m, &hist(&[("countWithLikes", &[25.0]), ("Index4", &idx4)])).unwrap();
        assert!((p - (0.0002 * 25.0 - 0.0014 * 0.6)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_predictions() {
        assert_eq!(predict_one_step(&model(Some(4.5), &[]), &History::new()).unwrap(), 4.5);
        let m = model(Some(1.25), &[("y", 1, 0.0), ("x", 2, 0.0)]);
        assert_eq!(predict_one_step(&m, &hist(&[("y", &[3.0]), ("x", &[5.0, 6.0])])).unwrap(), 1.25);
    }

    #[test]
    fn missing_history_names_series_and_lag() {
        let m = model(None, &[("y", 1, 0.5), ("x", 3, 1.0)]);
        match predict_one_step(&m, &hist(&[("y", &[1.0]), ("x", &[1.0, 2.0])])) {
            Err(EconError::MissingHistory { series, lag }) => assert_eq!((series.as_str(), lag), ("x", 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            predict_one_step(&m, &hist(&[("x", &[1.0; 5])])),
            Err(EconError::MissingHistory { lag: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn prediction_is_linear(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            c in -5.0f64..5.0,
            h in proptest::collection::vec(-100.0f64..100.0, 3),
        ) {
            let m = model(Some(a), &[("y", 1, b), ("x", 2, c)]);
            let mut m2 = m.clone();
            m2.intercept.as_mut().unwrap().value *= 2.0;
            for t in &mut m2.terms {
                t.coefficient *= 2.0;
            }
            let hs = hist(&[("y", &h), ("x", &h)]);
            let p1 = predict_one_step(&m, &hs).unwrap();
            let p2 = predict_one_step(&m2, &hs).unwrap();
            prop_assert!((p2 - 2.0 * p1).abs() <= 1e-9 * (1.0 + p1.abs()));
        }

        #[test]
        fn direction_accuracy_depends_on_signs_only(
            actual in proptest::collection::vec(-10.0f64..10.0, 2..30),
            noise in proptest::collection::vec(-1.0f64..1.0, 30),
        ) {
            let predicted: Vec<f64> = actual.iter().zip(&noise).map(|(a, e)| a + 3.0 * e).collect();
            let da = direction_accuracy(&actual, &predicted).unwrap();
            prop_assert!((0.0..=1.0).contains(&da));
            let f = |v: f64| v.powi(3) + 2.0 * v;
            let ta: Vec<f64> = actual.iter().map(|&v| f(v)).collect();
            let tp: Vec<f64> = predicted.iter().map(|&v| f(v)).collect();
            prop_assert_eq!(da, direction_accuracy(&ta, &tp).unwrap());
        }
    }

    #[test]
    fn mape_and_direction_arithmetic() {
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap().0 - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), (50.0, 1));
        assert!(mape(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert_eq!(direction_accuracy(&[1.0, 2.0, 1.0, 3.0], &[5.0, 4.0, 6.0, 2.0]).unwrap(), 0.0);
        let y = [1.0, 3.0, 2.0, 2.5];
        assert_eq!(mape(&y, &y).unwrap().0, 0.0);
        assert_eq!(direction_accuracy(&y, &y).unwrap(), 1.0);
        // A flat change on either side is not a hit.
        assert_eq!(direction_accuracy(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(direction_accuracy(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn m0_on_ar1() {
        let y = series("y", ar1(11, 500, 0.9));
        let m = fit_m0(&y, &SelectionParams::default()).unwrap();
        let lag1 = m.terms.iter().find(|t| t.lag == 1).expect("lag-1 term");
        assert!((lag1.coefficient - 0.9).abs() < 0.1, "{}", lag1.coefficient);
        assert!(m.terms.iter().all(|t| t.p_value < 0.05));
        assert!(m.residuals_white);
        assert!(m.flags.is_empty());
    }

    #[test]
    fn m0_on_white_noise_is_intercept_only() {
        // A white-noise target keeps no lag whenever all ten ACF lags fall
        // inside the band, probability ≈ 0.95^10; spurious lags can also be
        // eliminated afterwards, so that is a lower bound on the rate.
        let reps = 200;
        let mut flagged = 0;
        for seed in 0..reps {
            let y = series("y", noise(seed, 3, 300));
            let m = fit_m0(&y, &SelectionParams::default()).unwrap();
            if m.terms.is_empty() {
                assert!(m.has_flag(ModelFlag::InterceptOnly));
                assert!(m.intercept.is_some());
                flagged += 1;
            }
        }
        let p0 = 0.95f64.powi(10);
        let rate = flagged as f64 / reps as f64;
        assert!(rate >= p0 - 3.0 * (p0 * (1.0 - p0) / reps as f64).sqrt(), "{rate}");
        let flat = series("y", vec![3.0; 40]);
        let m = fit_m0(&flat, &SelectionParams::default()).unwrap();
        assert!((m.intercept.unwrap().value - 3.0).abs() < 1e-12);
        assert!(m.has_flag(ModelFlag::InterceptOnly));
    }

    #[test]
    fn random_walk_level_drops_intercept() {
        let e = noise(5, 0, 400);
        let mut close = vec![1000.0];
        for t in 1..400 {
            close.push(close[t - 1] + 5.0 * e[t]);
        }
        let y = series("close", close);
        let m = fit_m0(&y, &SelectionParams::default()).unwrap();
        let lag1 = m.terms.iter().find(|t| t.lag == 1).expect("lag-1 term");
        assert!((lag1.coefficient - 1.0).abs() < 0.1);
    }

    fn planted(seed: u64, n: usize, beta: f64) -> (Series, Vec<Series>) {
        let x = noise(seed, 1, n);
        let z = noise(seed, 2, n);
        let e = noise(seed, 3, n);
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.4 * y[t - 1] + beta * x[t - 1] + e[t];
        }
        (series("y", y), vec![series("x", x), series("z", z)])
    }

    #[test]
    fn m1_finds_planted_term() {
        let mut exact = 0;
        for seed in 0..10 {
            let (y, cands) = planted(seed, 500, 0.6);
            let params = SelectionParams::default();
            let m0 = fit_m0(&y, &params).unwrap();
            let m1 = build_m1(&m0, &y, &cands, &params).unwrap();
            let ext: Vec<&Term> = m1.terms.iter().filter(|t| t.series != "y").collect();
            if ext.len() == 1 && ext[0].series == "x" && ext[0].lag == 1 {
                let t = ext[0];
                if (t.coefficient - 0.6).abs() < 1.96 * t.std_error {
                    exact += 1;
                }
            }
            assert!(m1.terms.iter().all(|t| t.p_value < 0.05));
        }
        assert!(exact >= 9, "{exact}");
    }

    #[test]
    fn m1_ignores_noise() {
        let mut same = 0;
        for seed in 0..40 {
            let (y, _) = planted(seed, 300, 0.0);
            let cands: Vec<Series> = (0..6).map(|c| series(&format!("c{c}"), noise(seed, 10 + c, 300))).collect();
            let params = SelectionParams::default();
            let m0 = fit_m0(&y, &params).unwrap();
            let m1 = build_m1(&m0, &y, &cands, &params).unwrap();
            if m1.same_structure(&m0) {
                assert!(
                    m1.has_flag(ModelFlag::NoCandidateSurvivedScreening) || m1.has_flag(ModelFlag::AllInsertionsRejected)
                );
                assert_eq!(m1.terms, m0.terms);
                same += 1;
            }
        }
        assert!(same >= 36, "{same}");
    }

    #[test]
    fn insertion_order_and_undo() {
        // Two candidates carry the same signal; once the stronger is in, the
        // weaker adds nothing and is not kept.
        let n = 600;
        let x = noise(8, 1, n);
        let e = noise(8, 2, n);
        let w = noise(8, 3, n);
        let x2: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + 0.3 * b).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.8 * x[t - 1] + 0.3 * e[t];
        }
        let y = series("y", y);
        let cands = vec![series("noisy", x2), series("clean", x)];
        let params = SelectionParams::default();
        let m0 = fit_m0(&y, &params).unwrap();
        let m1 = build_m1(&m0, &y, &cands, &params).unwrap();
        assert_eq!(m1.external_series(), vec!["clean"]);
    }

    #[test]
    fn evaluate_rolls_over_tail() {
        let v: Vec<f64> = (0..50).map(|t| 1.0 + t as f64).collect();
        let y = series("y", v);
        let m = model(Some(1.0), &[("y", 1, 1.0)]);
        let r = evaluate(&m, 0.9, &y, &[]).unwrap();
        assert_eq!(r.n_test, 5);
        assert_eq!(r.points[0].date, y.dates[45]);
        assert_eq!(r.mape, 0.0);
        assert_eq!(r.direction_accuracy, 1.0);
        let short = series("y", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        assert!(matches!(evaluate(&m, 0.9, &short, &[]), Err(EconError::TooShort { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let y = series("y", ar1(2, 200, 0.7));
        let m = fit_m0(&y, &SelectionParams::default()).unwrap();
        assert_eq!(RegressionModel::from_json(&m.to_json()).unwrap(), m);
    }
}
