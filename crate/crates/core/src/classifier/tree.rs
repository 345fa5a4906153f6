//! C4.5 decision tree over sparse real-valued features.
//!
//! Binary threshold splits chosen by gain ratio among candidates with at
//! least average information gain, the MDL correction for the number of
//! thresholds tried, and pessimistic error pruning at a confidence level.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{argmax, class_index, ClassifierError, Dataset};
use crate::ingest::Sentiment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Pruning confidence factor; smaller prunes harder. `None` disables pruning.
    pub confidence: Option<f64>,
    /// Minimum case weight on each side of a split.
    pub min_leaf: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            confidence: Some(super::DEFAULT_CONFIDENCE),
            min_leaf: super::DEFAULT_MIN_LEAF,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if let Some(cf) = self.confidence {
            if !(cf > 0.0 && cf <= 0.5) {
                return Err(ClassifierError::Config(format!("pruning confidence must be in (0, 0.5], got {cf}")));
            }
        }
        if !(self.min_leaf >= 1.0 && self.min_leaf.is_finite()) {
            return Err(ClassifierError::Config(format!("min_leaf must be ≥ 1, got {}", self.min_leaf)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        dist: [f64; 2],
    },
    Split {
        feature: u32,
        /// Cases with value ≤ threshold go left.
        threshold: f64,
        dist: [f64; 2],
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn dist(&self) -> [f64; 2] {
        match self {
            Node::Leaf { dist } | Node::Split { dist, .. } => *dist,
        }
    }

    fn leaves(&self) -> Vec<[f64; 2]> {
        match self {
            Node::Leaf { dist } => vec![*dist],
            Node::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.size() + right.size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn value_of(row: &[(u32, f64)], feature: u32) -> f64 {
    row.binary_search_by_key(&feature, |&(j, _)| j).map_or(0.0, |k| row[k].1)
}

fn entropy_bits(dist: [f64; 2]) -> f64 {
    let n = dist[0] + dist[1];
    if n <= 0.0 {
        return 0.0;
    }
    dist.iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -(w / n) * (w / n).log2())
        .sum()
}

fn errors(dist: [f64; 2]) -> f64 {
    dist[0].min(dist[1])
}

/// Extra errors expected at the upper confidence limit for `e` observed
/// errors in `n` cases.
fn add_errs(n: f64, e: f64, cf: f64) -> f64 {
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (add_errs(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - e
}

fn estimated_errors(dist: [f64; 2], cf: f64) -> f64 {
    let n = dist[0] + dist[1];
    if n <= 0.0 {
        return 0.0;
    }
    let e = errors(dist);
    e + add_errs(n, e, cf)
}

struct Candidate {
    feature: u32,
    threshold: f64,
    gain: f64,
    ratio: f64,
}

/// Best threshold for one feature given its value groups in ascending order.
fn evaluate_feature(feature: u32, groups: &[(f64, [f64; 2])], dist: [f64; 2], min_split: f64) -> Option<Candidate> {
    let total = dist[0] + dist[1];
    let parent = entropy_bits(dist);
    let mut left = [0.0; 2];
    let mut tried = 0usize;
    let mut best: Option<(f64, f64, f64)> = None;
    for w in groups.windows(2) {
        left[0] += w[0].1[0];
        left[1] += w[0].1[1];
        let right = [dist[0] - left[0], dist[1] - left[1]];
        let (lw, rw) = (left[0] + left[1], right[0] + right[1]);
        if lw < min_split || rw < min_split {
            continue;
        }
        tried += 1;
        let gain = parent - (lw * entropy_bits(left) + rw * entropy_bits(right)) / total;
        if best.is_none_or(|(g, _, _)| gain > g) {
            best = Some((gain, (w[0].0 + w[1].0) / 2.0, lw));
        }
    }
    let (gain, threshold, lw) = best?;
    let gain = gain - (tried as f64).log2() / total;
    if gain <= 0.0 {
        return None;
    }
    let split_info = entropy_bits([lw, total - lw]);
    Some(Candidate {
        feature,
        threshold,
        gain,
        ratio: gain / split_info,
    })
}

struct Grower<'a> {
    data: &'a Dataset,
    labels: Vec<usize>,
    params: TreeParams,
}

impl Grower<'_> {
    fn distribution(&self, cases: &[(usize, f64)]) -> [f64; 2] {
        let mut d = [0.0; 2];
        for &(i, w) in cases {
            d[self.labels[i]] += w;
        }
        d
    }

    fn best_split(&self, cases: &[(usize, f64)], dist: [f64; 2]) -> Option<Candidate> {
        let total = dist[0] + dist[1];
        let min_split = (0.1 * total / 2.0).clamp(self.params.min_leaf, 25.0);
        if total < 2.0 * min_split {
            return None;
        }
        let mut entries: Vec<(u32, f64, usize, f64)> = Vec::new();
        for &(i, w) in cases {
            for &(j, x) in &self.data.rows[i] {
                entries.push((j, x, self.labels[i], w));
            }
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut candidates = Vec::new();
        let mut groups: Vec<(f64, [f64; 2])> = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let feature = entries[start].0;
            let end = start + entries[start..].partition_point(|e| e.0 == feature);
            let nonzero = &entries[start..end];
            let mut nz = [0.0; 2];
            for e in nonzero {
                nz[e.2] += e.3;
            }
            let zero = [(dist[0] - nz[0]).max(0.0), (dist[1] - nz[1]).max(0.0)];
            groups.clear();
            let mut zero_pending = zero[0] + zero[1] > 0.0;
            for e in nonzero {
                if zero_pending && e.1 > 0.0 {
                    groups.push((0.0, zero));
                    zero_pending = false;
                }
                match groups.last_mut() {
                    Some(g) if g.0 == e.1 => g.1[e.2] += e.3,
                    _ => {
                        let mut d = [0.0; 2];
                        d[e.2] = e.3;
                        groups.push((e.1, d));
                    }
                }
            }
            if zero_pending {
                groups.push((0.0, zero));
            }
            if groups.len() >= 2 {
                candidates.extend(evaluate_feature(feature, &groups, dist, min_split));
            }
            start = end;
        }
        if candidates.is_empty() {
            return None;
        }
        let avg_gain = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<Candidate> = None;
        for c in candidates.into_iter().filter(|c| c.gain >= avg_gain - 1e-3) {
            if best.as_ref().is_none_or(|b| c.ratio > b.ratio) {
                best = Some(c);
            }
        }
        best
    }

    fn grow(&self, cases: Vec<(usize, f64)>) -> Node {
        let dist = self.distribution(&cases);
        let total = dist[0] + dist[1];
        if total < 2.0 * self.params.min_leaf || errors(dist) == 0.0 {
            return Node::Leaf { dist };
        }
        let Some(split) = self.best_split(&cases, dist) else {
            return Node::Leaf { dist };
        };
        let (left, right): (Vec<_>, Vec<_>) = cases
            .into_iter()
            .partition(|&(i, _)| value_of(&self.data.rows[i], split.feature) <= split.threshold);
        if left.is_empty() || right.is_empty() {
            return Node::Leaf { dist };
        }
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            dist,
            left: Box::new(self.grow(left)),
            right: Box::new(self.grow(right)),
        }
    }
}

fn training_errors(node: &Node) -> f64 {
    match node {
        Node::Leaf { dist } => errors(*dist),
        Node::Split { left, right, .. } => training_errors(left) + training_errors(right),
    }
}

/// Replaces subtrees that do not reduce training errors by leaves.
fn collapse(node: Node) -> Node {
    let dist = node.dist();
    if let Node::Split { .. } = node {
        if training_errors(&node) >= errors(dist) - 1e-3 {
            return Node::Leaf { dist };
        }
    }
    match node {
        Node::Split {
            feature,
            threshold,
            dist,
            left,
            right,
        } => Node::Split {
            feature,
            threshold,
            dist,
            left: Box::new(collapse(*left)),
            right: Box::new(collapse(*right)),
        },
        leaf => leaf,
    }
}

/// Bottom-up pessimistic pruning.
fn prune(node: Node, cf: f64) -> Node {
    match node {
        Node::Split {
            feature,
            threshold,
            dist,
            left,
            right,
        } => {
            let pruned = Node::Split {
                feature,
                threshold,
                dist,
                left: Box::new(prune(*left, cf)),
                right: Box::new(prune(*right, cf)),
            };
            let as_tree: f64 = pruned.leaves().into_iter().map(|d| estimated_errors(d, cf)).sum();
            if estimated_errors(dist, cf) <= as_tree + 0.1 {
                Node::Leaf { dist }
            } else {
                pruned
            }
        }
        leaf => leaf,
    }
}

impl DecisionTree {
    /// `weights[i]` is the multiplicity of case `i`; zero-weight cases are
    /// ignored.
    pub fn fit(data: &Dataset, weights: &[f64], params: &TreeParams) -> Self {
        let grower = Grower {
            data,
            labels: data.labels.iter().map(|&l| class_index(l)).collect(),
            params: *params,
        };
        let cases = weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, &w)| (i, w)).collect();
        let mut root = collapse(grower.grow(cases));
        if let Some(cf) = params.confidence {
            root = prune(root, cf);
        }
        Self { root }
    }

    pub fn leaf(dist: [f64; 2]) -> Self {
        Self {
            root: Node::Leaf { dist },
        }
    }

    pub fn predict(&self, row: &[(u32, f64)]) -> Sentiment {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { dist } => return argmax(*dist),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if value_of(row, *feature) <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn class_distribution(&self) -> [f64; 2] {
        self.root.dist()
    }
}
