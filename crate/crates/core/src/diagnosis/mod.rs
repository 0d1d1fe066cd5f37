//! Failure-source classifiers: the fixed-hierarchy diagnosis tree, a free
//! CART baseline, and the random/ground-truth reference diagnoses.

mod brent;
mod cart;
mod mdtree;

pub use brent::{brent_min, BrentResult};
pub use cart::{cart_fit, CartModel, CartNode, FeaturePolicy, CART_MAX_DEPTH};
pub use mdtree::{
    default_search, mdtree_fit, DeepMetric, FitMode, LeafNode, MdTreeModel, SearchTriple,
    SplitFeature, SplitNode,
};

use crate::domain::{DiagnosisSample, FeatureVector, Label, Question};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("mixed questions in training set: {found:?} after {expected:?}")]
    MixedQuestions { expected: Question, found: Question },
    #[error("missing feature {feature}")]
    MissingFeature { feature: &'static str },
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Majority vote with the fixed tie rules: the larger count wins; an equal
/// split falls back to the class with the larger total training count; a
/// full tie takes the question's negative pole.
pub(crate) fn majority_label(
    pos: usize,
    neg: usize,
    total_pos: usize,
    total_neg: usize,
    question: Question,
) -> Label {
    use std::cmp::Ordering;
    match pos.cmp(&neg) {
        Ordering::Greater => question.positive_label(),
        Ordering::Less => question.negative_label(),
        Ordering::Equal => match total_pos.cmp(&total_neg) {
            Ordering::Greater => question.positive_label(),
            _ => question.negative_label(),
        },
    }
}

/// Uniform coin between the question's two poles.
pub fn random_diagnosis<R: Rng>(rng: &mut R, question: Question) -> Label {
    if rng.random::<bool>() {
        question.positive_label()
    } else {
        question.negative_label()
    }
}

/// Ground-truth passthrough.
pub fn optimal_diagnosis(sample: &DiagnosisSample) -> Label {
    sample.label
}

/// Any serializable fitted classifier, tagged for JSON round trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum FittedModel {
    MdTree(MdTreeModel),
    Cart(CartModel),
}

impl FittedModel {
    pub fn question(&self) -> Question {
        match self {
            FittedModel::MdTree(m) => m.question,
            FittedModel::Cart(m) => m.question,
        }
    }

    pub fn train_accuracy(&self) -> f64 {
        match self {
            FittedModel::MdTree(m) => m.train_accuracy,
            FittedModel::Cart(m) => m.train_accuracy,
        }
    }

    /// Predicted label, plus the regime id when the model reports one.
    pub fn predict(&self, features: &FeatureVector) -> Result<(Label, Option<u8>), DiagError> {
        match self {
            FittedModel::MdTree(m) => m.predict(features).map(|(l, r)| (l, Some(r))),
            FittedModel::Cart(m) => m.predict(features).map(|l| (l, None)),
        }
    }

    pub fn accuracy(&self, samples: &[DiagnosisSample]) -> Result<f64, DiagError> {
        match self {
            FittedModel::MdTree(m) => m.accuracy(samples),
            FittedModel::Cart(m) => m.accuracy(samples),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<(), DiagError> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json + "\n")
            .map_err(|source| DiagError::Io { path: path.display().to_string(), source })
    }

    pub fn load_json(path: &Path) -> Result<Self, DiagError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DiagError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| DiagError::Parse { path: path.display().to_string(), source })
    }
}
