use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_index, train_dataset, unit_seed, ClassifierConfig, ClassifierError, Dataset, FeatureSchema, Result};
use crate::ingest::Sentiment;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Unweighted mean of per-class recall.
    pub recall: f64,
    /// Unweighted mean of per-class F1.
    pub f_measure: f64,
    pub bullish: ClassMetrics,
    pub bearish: ClassMetrics,
    /// `confusion[truth][predicted]`, bullish first.
    pub confusion: [[u64; 2]; 2],
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn evaluate_predictions(truth: &[Sentiment], predicted: &[Sentiment]) -> EvalMetrics {
    assert_eq!(truth.len(), predicted.len(), "one prediction per example");
    let mut confusion = [[0u64; 2]; 2];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[class_index(t)][class_index(p)] += 1;
    }
    let per_class = |c: usize| {
        let tp = confusion[c][c];
        let support = confusion[c][0] + confusion[c][1];
        let predicted = confusion[0][c] + confusion[1][c];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f_measure,
            support,
        }
    };
    let (bullish, bearish) = (per_class(0), per_class(1));
    EvalMetrics {
        accuracy: ratio(confusion[0][0] + confusion[1][1], truth.len() as u64),
        recall: (bullish.recall + bearish.recall) / 2.0,
        f_measure: (bullish.f_measure + bearish.f_measure) / 2.0,
        bullish,
        bearish,
        confusion,
    }
}

/// Fold of each example. Each class is shuffled, then the classes are dealt
/// round-robin with one shared counter, so class proportions are even across
/// folds and fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Sentiment], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    if k < 2 || n < k {
        return Err(ClassifierError::TooFewExamples { n, k });
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let mut folds = vec![0; n];
    let mut counter = 0;
    for class in [Sentiment::Bullish, Sentiment::Bearish] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = counter % k;
            counter += 1;
        }
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation; metrics are pooled over the held-out
/// predictions. Fold `f` trains with its own seed derived from `config.seed`.
pub fn cross_validate(data: &Dataset, schema: &FeatureSchema, config: &ClassifierConfig, k: usize) -> Result<EvalMetrics> {
    config.validate()?;
    let folds = stratified_folds(&data.labels, k, config.seed)?;
    let per_fold: Vec<Vec<(usize, Sentiment)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
            let fold_config = ClassifierConfig {
                seed: unit_seed(config.seed, f),
                ..*config
            };
            let model = train_dataset(&data.subset(&train_idx), schema, &fold_config)?;
            Ok(test_idx.into_iter().map(|i| (i, model.predict_row(&data.rows[i]))).collect())
        })
        .collect::<Result<_>>()?;
    let mut predicted = vec![Sentiment::Bullish; data.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        predicted[i] = p;
    }
    Ok(evaluate_predictions(&data.labels, &predicted))
}

#[cfg(test)]
mod tests {
    use super::super::Algorithm;
    use super::*;
    use rand::Rng;
    use Sentiment::{Bearish, Bullish};

    #[test]
    fn metric_arithmetic() {
        let t = [Bullish, Bullish, Bullish, Bearish];
        let p = [Bullish, Bullish, Bearish, Bearish];
        let m = evaluate_predictions(&t, &p);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.bullish.recall, 2.0 / 3.0);
        assert_eq!(m.bearish.recall, 1.0);
        assert_eq!(m.recall, (2.0 / 3.0 + 1.0) / 2.0);
        assert_eq!(m.bullish.precision, 1.0);
        assert_eq!(m.bearish.precision, 0.5);
        assert!((m.bullish.f_measure - 0.8).abs() < 1e-15);
        assert!((m.bearish.f_measure - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.confusion, [[2, 1], [0, 1]]);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<_> = (0..103).map(|i| if i % 3 == 0 { Bearish } else { Bullish }).collect();
        let folds = stratified_folds(&labels, 10, 1).unwrap();
        for f in 0..10 {
            let in_fold: Vec<_> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
            assert!((10..=11).contains(&in_fold.len()));
            let bear = in_fold.iter().filter(|&&i| labels[i] == Bearish).count();
            assert!((3..=4).contains(&bear), "fold {f}: {bear}");
        }
        assert!(stratified_folds(&labels[..5], 10, 1).is_err());
    }

    fn one_feature(points: &[(f64, Sentiment)]) -> (Dataset, FeatureSchema) {
        let data = Dataset {
            rows: points.iter().map(|&(x, _)| if x == 0.0 { vec![] } else { vec![(0, x)] }).collect(),
            labels: points.iter().map(|p| p.1).collect(),
            width: 1,
        };
        let schema = FeatureSchema {
            terms: vec!["x".into()],
            include_score: false,
        };
        (data, schema)
    }

    fn config(algorithm: Algorithm, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            algorithm,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let pts: Vec<_> = (1..=30).flat_map(|i| [(i as f64, Bullish), (-(i as f64), Bearish)]).collect();
        let (d, s) = one_feature(&pts);
        for alg in [Algorithm::NaiveBayes, Algorithm::DecisionTree, Algorithm::Bagging] {
            let m = cross_validate(&d, &s, &config(alg, 3), 10).unwrap();
            assert_eq!((m.accuracy, m.recall, m.f_measure), (1.0, 1.0, 1.0), "{alg}");
        }
    }

    #[test]
    fn leave_one_out_on_four_points() {
        let (d, s) = one_feature(&[(1.0, Bullish), (2.0, Bullish), (-1.0, Bearish), (-2.0, Bearish)]);
        for alg in [Algorithm::NaiveBayes, Algorithm::DecisionTree, Algorithm::Bagging] {
            cross_validate(&d, &s, &config(alg, 3), 4).unwrap();
        }
    }

    #[test]
    fn deterministic_metrics() {
        let mut rng = stream_rng(9, 0);
        let pts: Vec<_> = (0..300)
            .map(|_| {
                let bull = rng.gen_bool(0.5);
                (rng.gen_range(-1.0..1.0) + if bull { 0.3 } else { -0.3 }, if bull { Bullish } else { Bearish })
            })
            .collect();
        let (d, s) = one_feature(&pts);
        let a = cross_validate(&d, &s, &config(Algorithm::Bagging, 4), 10).unwrap();
        let b = cross_validate(&d, &s, &config(Algorithm::Bagging, 4), 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coin_flip_labels_stay_near_half() {
        // Labels independent of the feature: accuracy within 3σ of 0.5.
        let n = 2000;
        let mut rng = stream_rng(21, 0);
        let pts: Vec<_> = (0..n)
            .map(|_| (rng.gen_range(-1.0..1.0), if rng.gen_bool(0.5) { Bullish } else { Bearish }))
            .collect();
        let (d, s) = one_feature(&pts);
        let sigma = (0.25 / n as f64).sqrt();
        for alg in [Algorithm::NaiveBayes, Algorithm::DecisionTree] {
            let m = cross_validate(&d, &s, &config(alg, 2), 10).unwrap();
            assert!((m.accuracy - 0.5).abs() <= 3.0 * sigma, "{alg}: {}", m.accuracy);
        }
    }

    #[test]
    fn accuracy_rises_with_signal() {
        let n = 400;
        let mut violations = 0;
        for seed in 0..20u64 {
            let mut prev = 0.0;
            for (step, strength) in [0.0, 0.5, 1.5].into_iter().enumerate() {
                let mut rng = stream_rng(seed, step as u64);
                let pts: Vec<_> = (0..n)
                    .map(|_| {
                        let bull = rng.gen_bool(0.5);
                        let shift = if bull { strength } else { -strength };
                        (rng.gen_range(-1.0..1.0) + shift, if bull { Bullish } else { Bearish })
                    })
                    .collect();
                let (d, s) = one_feature(&pts);
                let acc = cross_validate(&d, &s, &config(Algorithm::DecisionTree, seed), 10).unwrap().accuracy;
                if acc < prev {
                    violations += 1;
                }
                prev = acc;
            }
        }
        assert!(violations <= 1, "{violations} violations");
    }
}
