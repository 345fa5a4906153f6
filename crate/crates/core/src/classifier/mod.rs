//! Lexicon-feature comment classifiers and their cross-validation.

mod cv;
mod features;
mod naive_bayes;
mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Sentiment;
use crate::rng::{derive_seed, stream_rng};

pub use cv::{cross_validate, evaluate_predictions, stratified_folds, ClassMetrics, EvalMetrics};
pub use features::{comment_score, featurize, match_terms, FeatureSchema, FeatureVector, SCORE_FEATURE};
pub use naive_bayes::GaussianNb;
pub use tree::{DecisionTree, Node, TreeParams};

pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_BAGGING_SIZE: usize = 25;
pub const DEFAULT_CONFIDENCE: f64 = 0.25;
pub const DEFAULT_MIN_LEAF: f64 = 2.0;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("training example {0} is unlabeled")]
    Unlabeled(usize),
    #[error("training data has only {0} examples; both classes are required")]
    SingleClass(Sentiment),
    #[error("no training examples")]
    Empty,
    #[error("{n} examples cannot be split into {k} folds")]
    TooFewExamples { n: usize, k: usize },
    #[error("invalid classifier setting: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    NaiveBayes,
    DecisionTree,
    Bagging,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NaiveBayes => "naive_bayes",
            Self::DecisionTree => "decision_tree",
            Self::Bagging => "bagging",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive_bayes" | "nb" => Ok(Self::NaiveBayes),
            "decision_tree" | "tree" | "j48" => Ok(Self::DecisionTree),
            "bagging" => Ok(Self::Bagging),
            _ => Err(format!("unknown algorithm {s:?} (expected naive_bayes, decision_tree or bagging)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub algorithm: Algorithm,
    pub bagging_size: usize,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Bagging,
            bagging_size: DEFAULT_BAGGING_SIZE,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bagging_size == 0 {
            return Err(ClassifierError::Config("bagging size must be at least 1".into()));
        }
        self.tree.validate()
    }
}

/// Class index used inside the learners; bullish first so that argmax ties
/// resolve to bullish.
pub(crate) fn class_index(s: Sentiment) -> usize {
    match s {
        Sentiment::Bullish => 0,
        Sentiment::Bearish => 1,
    }
}

/// Bullish unless bearish strictly wins.
pub(crate) fn argmax(scores: [f64; 2]) -> Sentiment {
    if scores[1] > scores[0] {
        Sentiment::Bearish
    } else {
        Sentiment::Bullish
    }
}

/// Sparse labeled rows in schema order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub labels: Vec<Sentiment>,
    pub width: usize,
}

impl Dataset {
    pub fn from_vectors(vectors: &[FeatureVector], schema: &FeatureSchema) -> Result<Self> {
        let mut rows = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            labels.push(v.label.ok_or(ClassifierError::Unlabeled(i))?);
            rows.push(schema.sparse(v)?);
        }
        Ok(Self {
            rows,
            labels,
            width: schema.width(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            width: self.width,
        }
    }

    fn check_two_classes(&self) -> Result<()> {
        let first = *self.labels.first().ok_or(ClassifierError::Empty)?;
        if self.labels.iter().all(|&l| l == first) {
            return Err(ClassifierError::SingleClass(first));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    NaiveBayes(GaussianNb),
    DecisionTree(DecisionTree),
    Bagging { trees: Vec<DecisionTree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub version: u32,
    pub algorithm: Algorithm,
    pub schema: FeatureSchema,
    pub seed: u64,
    pub model: Model,
}

fn bootstrap_weights(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = stream_rng(seed, stream);
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[rng.gen_range(0..n)] += 1.0;
    }
    w
}

pub fn train_dataset(data: &Dataset, schema: &FeatureSchema, config: &ClassifierConfig) -> Result<TrainedClassifier> {
    config.validate()?;
    if data.width != schema.width() {
        return Err(ClassifierError::Schema(format!(
            "dataset has {} columns, schema {}",
            data.width,
            schema.width()
        )));
    }
    data.check_two_classes()?;
    let model = match config.algorithm {
        Algorithm::NaiveBayes => Model::NaiveBayes(GaussianNb::fit(data)),
        Algorithm::DecisionTree => {
            Model::DecisionTree(DecisionTree::fit(data, &vec![1.0; data.len()], &config.tree))
        }
        Algorithm::Bagging => {
            let trees = (0..config.bagging_size)
                .into_par_iter()
                .map(|b| {
                    let w = bootstrap_weights(data.len(), config.seed, b as u64);
                    DecisionTree::fit(data, &w, &config.tree)
                })
                .collect();
            Model::Bagging { trees }
        }
    };
    Ok(TrainedClassifier {
        version: MODEL_VERSION,
        algorithm: config.algorithm,
        schema: schema.clone(),
        seed: config.seed,
        model,
    })
}

pub fn train(vectors: &[FeatureVector], schema: &FeatureSchema, config: &ClassifierConfig) -> Result<TrainedClassifier> {
    train_dataset(&Dataset::from_vectors(vectors, schema)?, schema, config)
}

impl TrainedClassifier {
    pub fn predict(&self, v: &FeatureVector) -> Result<Sentiment> {
        Ok(self.predict_row(&self.schema.sparse(v)?))
    }

    pub fn predict_row(&self, row: &[(u32, f64)]) -> Sentiment {
        match &self.model {
            Model::NaiveBayes(nb) => nb.predict(row),
            Model::DecisionTree(t) => t.predict(row),
            Model::Bagging { trees } => {
                let mut votes = [0.0; 2];
                for t in trees {
                    votes[class_index(t.predict(row))] += 1.0;
                }
                argmax(votes)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if m.version != MODEL_VERSION {
            return Err(ClassifierError::Format(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        serde_json::to_writer(&mut w, self).map_err(|e| ClassifierError::Format(e.to_string()))?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let m: Self =
            serde_json::from_reader(BufReader::new(f)).map_err(|e| ClassifierError::Format(e.to_string()))?;
        Self::from_json(&serde_json::to_string(&m).expect("models serialize"))
    }
}

/// Seed of fold or unit `index` under a master seed.
pub fn unit_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use Sentiment::{Bearish, Bullish};

    fn vec_of(pairs: &[(&str, f64)], label: Sentiment) -> FeatureVector {
        FeatureVector {
            term_features: pairs.iter().map(|(t, v)| (t.to_string(), *v)).collect::<BTreeMap<_, _>>(),
            comment_score: None,
            label: Some(label),
        }
    }

    fn separable() -> (Vec<FeatureVector>, FeatureSchema) {
        let mut v = Vec::new();
        for i in 0..20 {
            let x = 1.0 + i as f64 * 0.1;
            v.push(vec_of(&[("good", x)], Bullish));
            v.push(vec_of(&[("bad", -x)], Bearish));
        }
        let schema = FeatureSchema {
            terms: vec!["bad".into(), "good".into()],
            include_score: false,
        };
        (v, schema)
    }

    fn config(algorithm: Algorithm) -> ClassifierConfig {
        ClassifierConfig {
            algorithm,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn separable_training_accuracy_is_perfect() {
        let (v, schema) = separable();
        for alg in [Algorithm::NaiveBayes, Algorithm::DecisionTree, Algorithm::Bagging] {
            let m = train(&v, &schema, &config(alg)).unwrap();
            for x in &v {
                assert_eq!(m.predict(x).unwrap(), x.label.unwrap(), "{alg}");
            }
        }
    }

    #[test]
    fn single_class_and_unlabeled_rejected() {
        let (v, schema) = separable();
        let bull: Vec<_> = v.iter().filter(|x| x.label == Some(Bullish)).cloned().collect();
        assert!(matches!(
            train(&bull, &schema, &config(Algorithm::DecisionTree)),
            Err(ClassifierError::SingleClass(Bullish))
        ));
        let mut unl = v.clone();
        unl[3].label = None;
        assert!(matches!(
            train(&unl, &schema, &config(Algorithm::NaiveBayes)),
            Err(ClassifierError::Unlabeled(3))
        ));
        assert!(matches!(train(&[], &schema, &config(Algorithm::NaiveBayes)), Err(ClassifierError::Empty)));
    }

    #[test]
    fn same_seed_same_model() {
        let (v, schema) = separable();
        let a = train(&v, &schema, &config(Algorithm::Bagging)).unwrap();
        let b = train(&v, &schema, &config(Algorithm::Bagging)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tie_goes_to_bullish() {
        // Mirror-image classes: the zero vector is equidistant.
        let mut v = Vec::new();
        for i in 1..=5 {
            v.push(vec_of(&[("x", i as f64)], Bullish));
            v.push(vec_of(&[("x", -(i as f64))], Bearish));
        }
        let schema = FeatureSchema {
            terms: vec!["x".into()],
            include_score: false,
        };
        let nb = train(&v, &schema, &config(Algorithm::NaiveBayes)).unwrap();
        assert_eq!(nb.predict(&vec_of(&[], Bullish)).unwrap(), Bullish);
        assert_eq!(argmax([0.3, 0.3]), Bullish);
        let tie = TrainedClassifier {
            model: Model::Bagging {
                trees: vec![
                    DecisionTree::leaf([1.0, 0.0]),
                    DecisionTree::leaf([0.0, 1.0]),
                ],
            },
            ..nb
        };
        assert_eq!(tie.predict_row(&[]), Bullish);
    }

    #[test]
    fn one_tree_bagging_equals_its_tree() {
        let (v, schema) = separable();
        let cfg = ClassifierConfig {
            bagging_size: 1,
            ..config(Algorithm::Bagging)
        };
        let bag = train(&v, &schema, &cfg).unwrap();
        let Model::Bagging { trees } = &bag.model else { unreachable!() };
        let probe = [vec_of(&[("good", 0.5)], Bullish), vec_of(&[("bad", -3.0)], Bullish), vec_of(&[], Bullish)];
        for p in &probe {
            let row = schema.sparse(p).unwrap();
            assert_eq!(bag.predict_row(&row), trees[0].predict(&row));
        }
    }

    #[test]
    fn model_json_round_trip() {
        let (v, schema) = separable();
        for alg in [Algorithm::NaiveBayes, Algorithm::DecisionTree, Algorithm::Bagging] {
            let m = train(&v, &schema, &config(alg)).unwrap();
            let back = TrainedClassifier::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = train(&v, &schema, &config(Algorithm::Bagging)).unwrap();
        m.save(&path).unwrap();
        assert_eq!(TrainedClassifier::load(&path).unwrap(), m);
        let bad = m.to_json().replacen("\"version\":1", "\"version\":9", 1);
        assert!(TrainedClassifier::from_json(&bad).is_err());
    }

    #[test]
    fn schema_mismatch_on_predict() {
        let (v, schema) = separable();
        let m = train(&v, &schema, &config(Algorithm::DecisionTree)).unwrap();
        assert!(m.predict(&vec_of(&[("ugly", 1.0)], Bullish)).is_err());
    }
}
