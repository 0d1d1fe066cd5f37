//! Free-structure CART baseline: greedy Gini splits, depth capped at 4.
//!
//! The tree learns its own structure, unlike the fixed-hierarchy diagnosis
//! tree it is compared against. Determinism is guaranteed by fixed tie
//! rules: among equal-gain splits the lowest feature index wins, then the
//! lowest threshold; `feature >= threshold` routes right.

use crate::diagnosis::{majority_label, DiagError};
use crate::domain::{DiagnosisSample, FeatureVector, Label, Question};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const CART_MAX_DEPTH: usize = 4;
pub const CART_MIN_SAMPLES_SPLIT: usize = 2;

/// Which features the baseline sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePolicy {
    /// Landscape metrics: train error, connectivity, log10 sharpness,
    /// similarity.
    LossLandscape,
    /// Error and loss metrics only.
    Validation,
    /// The context hyperparameters a question does not ask about.
    Hyperparameter,
    /// Validation metrics plus the context hyperparameters.
    Combined,
}

fn hyper_names(question: Question) -> &'static [&'static str] {
    match question {
        Question::Q1 => &["width_p", "data_fraction_n"],
        Question::Q2 => &["data_fraction_n"],
        Question::Q2N => &["width_p"],
    }
}

const VALIDATION_NAMES: [&str; 4] = ["val_error", "train_error", "val_loss", "train_loss"];
const LANDSCAPE_NAMES: [&str; 4] =
    ["train_error", "connectivity_pct", "sharpness_log10", "similarity"];

impl FeaturePolicy {
    pub fn feature_names(self, question: Question) -> Vec<&'static str> {
        match self {
            FeaturePolicy::LossLandscape => LANDSCAPE_NAMES.to_vec(),
            FeaturePolicy::Validation => VALIDATION_NAMES.to_vec(),
            FeaturePolicy::Hyperparameter => hyper_names(question).to_vec(),
            FeaturePolicy::Combined => {
                let mut names = VALIDATION_NAMES.to_vec();
                names.extend_from_slice(hyper_names(question));
                names
            }
        }
    }

    pub fn project(self, question: Question, features: &FeatureVector) -> Vec<f64> {
        self.feature_names(question).iter().map(|name| feature_by_name(features, name)).collect()
    }
}

fn feature_by_name(features: &FeatureVector, name: &str) -> f64 {
    match name {
        "train_error" => features.train_error,
        "val_error" => features.val_error,
        "train_loss" => features.train_loss,
        "val_loss" => features.val_loss,
        "connectivity_pct" => features.connectivity_pct,
        "sharpness_log10" => features.sharpness_log10,
        "similarity" => features.similarity,
        "width_p" => features.width_p,
        "batch_size_t" => features.batch_size_t,
        "data_fraction_n" => features.data_fraction_n,
        other => unreachable!("unknown feature name {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CartNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { label: Label, counts: BTreeMap<Label, usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    pub question: Question,
    pub policy: FeaturePolicy,
    pub feature_names: Vec<String>,
    /// Node arena; the root is index 0.
    pub nodes: Vec<CartNode>,
    pub majority: Label,
    pub train_accuracy: f64,
    pub train_size: usize,
}

fn gini(pos: usize, neg: usize) -> f64 {
    let n = (pos + neg) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = pos as f64 / n;
    let q = neg as f64 / n;
    1.0 - p * p - q * q
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    positive: &'a [bool],
    total_pos: usize,
    total_neg: usize,
    question: Question,
    nodes: Vec<CartNode>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.positive[i]).count();
        let neg = idx.len() - pos;
        let label = majority_label(pos, neg, self.total_pos, self.total_neg, self.question);
        let mut counts = BTreeMap::new();
        counts.insert(self.question.positive_label(), pos);
        counts.insert(self.question.negative_label(), neg);
        self.nodes.push(CartNode::Leaf { label, counts });
        self.nodes.len() - 1
    }

    /// Best split of `idx` by Gini gain, or None when no split helps.
    /// Ties take the lowest feature index, then the lowest threshold.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let pos = idx.iter().filter(|&&i| self.positive[i]).count();
        let neg = idx.len() - pos;
        let parent = gini(pos, neg);
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let n_features = self.rows[idx[0]].len();
        for feature in 0..n_features {
            let mut values: Vec<f64> = idx.iter().map(|&i| self.rows[i][feature]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let threshold = 0.5 * (pair[0] + pair[1]);
                let mut left = (0usize, 0usize);
                let mut right = (0usize, 0usize);
                for &i in idx {
                    let side = if self.rows[i][feature] >= threshold { &mut right } else { &mut left };
                    if self.positive[i] {
                        side.0 += 1;
                    } else {
                        side.1 += 1;
                    }
                }
                let nl = (left.0 + left.1) as f64;
                let nr = (right.0 + right.1) as f64;
                let gain =
                    parent - (nl / n) * gini(left.0, left.1) - (nr / n) * gini(right.0, right.1);
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.positive[i]).count();
        let pure = pos == 0 || pos == idx.len();
        if pure || depth >= CART_MAX_DEPTH || idx.len() < CART_MIN_SAMPLES_SPLIT {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.rows[i][feature] < threshold);
        // Reserve the split slot before the children so the root stays at 0.
        self.nodes.push(CartNode::Split { feature, threshold, left: 0, right: 0 });
        let slot = self.nodes.len() - 1;
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[slot] = CartNode::Split { feature, threshold, left, right };
        slot
    }
}

/// Fits a depth-4 CART on the features selected by `policy`.
pub fn cart_fit(samples: &[DiagnosisSample], policy: FeaturePolicy) -> Result<CartModel, DiagError> {
    let first = samples.first().ok_or(DiagError::EmptyTrainingSet)?;
    let question = first.question;
    for sample in samples {
        if sample.question != question {
            return Err(DiagError::MixedQuestions { expected: question, found: sample.question });
        }
    }
    let names = policy.feature_names(question);
    let rows: Vec<Vec<f64>> =
        samples.iter().map(|s| policy.project(question, &s.features)).collect();
    for row in &rows {
        for (value, name) in row.iter().zip(&names) {
            if !value.is_finite() {
                return Err(DiagError::MissingFeature { feature: name });
            }
        }
    }
    let positive: Vec<bool> =
        samples.iter().map(|s| s.label == question.positive_label()).collect();
    let total_pos = positive.iter().filter(|&&p| p).count();
    let total_neg = samples.len() - total_pos;
    let mut builder = Builder {
        rows: &rows,
        positive: &positive,
        total_pos,
        total_neg,
        question,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..samples.len()).collect();
    let root = builder.build(&all, 0);
    debug_assert_eq!(root, 0);
    let model = CartModel {
        question,
        policy,
        feature_names: names.iter().map(|s| s.to_string()).collect(),
        nodes: builder.nodes,
        majority: majority_label(total_pos, total_neg, total_pos, total_neg, question),
        train_accuracy: 0.0,
        train_size: samples.len(),
    };
    let correct = samples
        .iter()
        .filter(|s| model.predict(&s.features).expect("features checked") == s.label)
        .count();
    Ok(CartModel { train_accuracy: correct as f64 / samples.len() as f64, ..model })
}

impl CartModel {
    pub fn predict(&self, features: &FeatureVector) -> Result<Label, DiagError> {
        let row = self.policy.project(self.question, features);
        for (value, name) in row.iter().zip(self.policy.feature_names(self.question)) {
            if !value.is_finite() {
                return Err(DiagError::MissingFeature { feature: name });
            }
        }
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                CartNode::Leaf { label, .. } => return Ok(*label),
                CartNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] >= *threshold { *right } else { *left };
                }
            }
        }
    }

    pub fn accuracy(&self, samples: &[DiagnosisSample]) -> Result<f64, DiagError> {
        if samples.is_empty() {
            return Err(DiagError::EmptyTrainingSet);
        }
        let mut correct = 0usize;
        for sample in samples {
            if self.predict(&sample.features)? == sample.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}
