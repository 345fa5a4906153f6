use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::Sentiment;
use crate::lexicon::{SentimentLexicon, TermKind};
use crate::text::Ngrams;

use super::ClassifierError;

/// Feature name of the comment polarity score in a schema.
pub const SCORE_FEATURE: &str = "__score__";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Lexicon term → occurrence count × score.
    pub term_features: BTreeMap<String, f64>,
    /// Mean matched score per token; `None` when the feature is disabled.
    pub comment_score: Option<f64>,
    pub label: Option<Sentiment>,
}

/// Occurrences of lexicon terms, bigrams matched first. A unigram occurrence
/// covered by a matched bigram is not counted again.
pub fn match_terms(ngrams: &Ngrams, lexicon: &SentimentLexicon) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    let n = ngrams.len();
    let mut consumed = vec![false; n];
    // Left-to-right, non-overlapping.
    for i in 0..n.saturating_sub(1) {
        if consumed[i] {
            continue;
        }
        let key = &ngrams.bigrams[i];
        if lexicon.get(key).is_some_and(|e| e.kind == TermKind::Bigram) {
            consumed[i] = true;
            consumed[i + 1] = true;
            *counts.entry(key.clone()).or_insert(0) += 1;
        }
    }
    for i in (0..n).filter(|&i| !consumed[i]) {
        let t = &ngrams.unigrams[i];
        if lexicon.get(t).is_some_and(|e| e.kind == TermKind::Unigram) {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn featurize(
    ngrams: &Ngrams,
    lexicon: &SentimentLexicon,
    include_score: bool,
    label: Option<Sentiment>,
) -> FeatureVector {
    let mut total = 0.0;
    let mut term_features = BTreeMap::new();
    for (term, count) in match_terms(ngrams, lexicon) {
        let s = lexicon.get(&term).expect("matched terms are in the lexicon").score;
        let v = f64::from(count) * s;
        total += v;
        term_features.insert(term, v);
    }
    let comment_score = include_score.then(|| if ngrams.is_empty() { 0.0 } else { total / ngrams.len() as f64 });
    FeatureVector {
        term_features,
        comment_score,
        label,
    }
}

/// Polarity score of a comment (always computed, regardless of schema).
pub fn comment_score(ngrams: &Ngrams, lexicon: &SentimentLexicon) -> f64 {
    featurize(ngrams, lexicon, true, None).comment_score.unwrap_or(0.0)
}

/// Fixed column order used by the learners.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub terms: Vec<String>,
    pub include_score: bool,
}

impl FeatureSchema {
    pub fn from_lexicon(lexicon: &SentimentLexicon, include_score: bool) -> Self {
        Self {
            terms: lexicon.entries.keys().cloned().collect(),
            include_score,
        }
    }

    pub fn width(&self) -> usize {
        self.terms.len() + usize::from(self.include_score)
    }

    pub fn column_name(&self, j: usize) -> &str {
        self.terms.get(j).map_or(SCORE_FEATURE, String::as_str)
    }

    /// Sorted `(column, value)` pairs for the non-zero entries.
    pub fn sparse(&self, v: &FeatureVector) -> Result<Vec<(u32, f64)>, ClassifierError> {
        if v.comment_score.is_some() != self.include_score {
            return Err(ClassifierError::Schema(format!(
                "score feature {} in vector but {} in model",
                if v.comment_score.is_some() { "present" } else { "absent" },
                if self.include_score { "expected" } else { "not expected" },
            )));
        }
        let mut row = Vec::with_capacity(v.term_features.len() + 1);
        for (term, &value) in &v.term_features {
            let j = self
                .terms
                .binary_search(term)
                .map_err(|_| ClassifierError::Schema(format!("term {term:?} is not in the model schema")))?;
            if value != 0.0 {
                row.push((j as u32, value));
            }
        }
        row.sort_by_key(|&(j, _)| j);
        if let Some(s) = v.comment_score.filter(|&s| s != 0.0) {
            row.push((self.terms.len() as u32, s));
        }
        Ok(row)
    }

    pub fn dense(&self, v: &FeatureVector) -> Result<Vec<f64>, ClassifierError> {
        let mut out = vec![0.0; self.width()];
        for (j, x) in self.sparse(v)? {
            out[j as usize] = x;
        }
        Ok(out)
    }
}
