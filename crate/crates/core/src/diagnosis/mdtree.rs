//! Model-diagnosis tree with a fixed hierarchy and fitted thresholds.
//!
//! The split plan never changes: the root separates interpolating from
//! non-interpolating models on training error, each side then splits on mode
//! connectivity, and the interpolating poor-connectivity branch splits once
//! more on a deep metric (log10 sharpness by default, representation
//! similarity in the ablation variant). Only the four thresholds and the five
//! leaf labels are learned. Thresholds are fitted one node at a time from the
//! top, each maximizing whole-training-set accuracy of the partial tree with
//! provisional majority labels at every open position.

use crate::diagnosis::brent::brent_min;
use crate::diagnosis::{majority_label, DiagError};
use crate::domain::{DiagnosisSample, FeatureVector, Label, Question};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::BTreeMap;

/// Argument tolerance for the bounded threshold search.
const THRESHOLD_XATOL: f64 = 1e-5;
/// Iteration cap for the bounded threshold search.
const BRENT_MAX_ITER: usize = 100;
/// Intervals of the rank-spaced pre-scan that seeds the bounded search.
/// Accuracy objectives are staircases whose best plateau can be narrow and
/// far from the initial threshold; a purely local descent would never sample
/// it. With 64 intervals the pre-scan reaches every achievable partition of
/// up to 65 samples, so on small inputs the seeded search is already exact
/// and the descent only matters beyond that.
const PRESCAN_INTERVALS: usize = 64;
/// Order in which internal nodes are fitted: top-down, left-to-right.
const FIT_ORDER: [usize; 4] = [0, 1, 3, 2];

/// Features a split node can test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitFeature {
    TrainError,
    ConnectivityPct,
    SharpnessLog10,
    Similarity,
}

impl SplitFeature {
    pub fn name(self) -> &'static str {
        match self {
            SplitFeature::TrainError => "train_error",
            SplitFeature::ConnectivityPct => "connectivity_pct",
            SplitFeature::SharpnessLog10 => "sharpness_log10",
            SplitFeature::Similarity => "similarity",
        }
    }

    pub fn value(self, features: &FeatureVector) -> f64 {
        match self {
            SplitFeature::TrainError => features.train_error,
            SplitFeature::ConnectivityPct => features.connectivity_pct,
            SplitFeature::SharpnessLog10 => features.sharpness_log10,
            SplitFeature::Similarity => features.similarity,
        }
    }
}

/// The metric used by the deep split under the poor-connectivity branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeepMetric {
    Sharpness,
    Similarity,
}

/// How thresholds are searched within their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Bounded scalar search from the initial value, with plateau refinement.
    Brent,
    /// Exhaustive scan over midpoints of consecutive feature values; the
    /// reference mode. Ties take the smallest threshold.
    ExactScan,
}

/// Initial value and search bounds for one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchTriple {
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Default search triple for a feature under a given question.
pub fn default_search(feature: SplitFeature, question: Question) -> SearchTriple {
    match feature {
        SplitFeature::TrainError => SearchTriple { initial: 0.5, lower: 0.0, upper: 1.0 },
        SplitFeature::ConnectivityPct => {
            SearchTriple { initial: -10.0, lower: -30.0, upper: 0.0 }
        }
        SplitFeature::SharpnessLog10 => {
            let initial = match question {
                Question::Q1 => 5.0,
                Question::Q2 | Question::Q2N => 7.0,
            };
            SearchTriple { initial, lower: 4.0, upper: 9.0 }
        }
        SplitFeature::Similarity => SearchTriple { initial: 0.5, lower: 0.2, upper: 0.8 },
    }
}

/// One internal node: `feature >= threshold` routes right, everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub feature: SplitFeature,
    pub threshold: f64,
    pub search: SearchTriple,
}

/// One leaf: the regime number, the learned class, and the training counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    pub regime: u8,
    pub label: Label,
    pub counts: BTreeMap<Label, usize>,
}

/// Fitted diagnosis tree.
///
/// Node positions are fixed: 0 is the root on training error; 1 splits the
/// interpolating side on connectivity; 2 splits its poor-connectivity branch
/// on the deep metric; 3 splits the non-interpolating side on connectivity.
/// Leaves are numbered by regime: 1 interpolating, poor connectivity, low
/// deep metric; 2 same but high deep metric; 3 interpolating with good
/// connectivity; 4 non-interpolating with poor connectivity; 5
/// non-interpolating with good connectivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdTreeModel {
    pub question: Question,
    pub deep_metric: DeepMetric,
    pub fit_mode: FitMode,
    pub nodes: [SplitNode; 4],
    pub leaves: [LeafNode; 5],
    /// True when training data held fewer than two classes; the model then
    /// predicts `majority` everywhere and reports regime 0.
    pub degenerate: bool,
    pub majority: Label,
    pub train_accuracy: f64,
    pub train_size: usize,
}

fn deep_feature(metric: DeepMetric) -> SplitFeature {
    match metric {
        DeepMetric::Sharpness => SplitFeature::SharpnessLog10,
        DeepMetric::Similarity => SplitFeature::Similarity,
    }
}

/// Per-sample values of the three features the hierarchy tests, in node
/// order: train error, connectivity, deep metric.
fn node_values(features: &FeatureVector, metric: DeepMetric) -> Result<[f64; 3], DiagError> {
    let values = [
        SplitFeature::TrainError.value(features),
        SplitFeature::ConnectivityPct.value(features),
        deep_feature(metric).value(features),
    ];
    let names = [
        SplitFeature::TrainError.name(),
        SplitFeature::ConnectivityPct.name(),
        deep_feature(metric).name(),
    ];
    for (value, name) in values.iter().zip(names) {
        if !value.is_finite() {
            return Err(DiagError::MissingFeature { feature: name });
        }
    }
    Ok(values)
}

/// Routes one sample through the tree with the given thresholds, treating
/// inactive nodes as open positions. Returns a stable position id; ids of
/// actual leaves are their regime numbers, open positions get ids >= 6.
fn route_position(values: &[f64; 3], thresholds: &[f64; 4], active: &[bool; 4]) -> usize {
    if !active[0] {
        return 6;
    }
    if values[0] >= thresholds[0] {
        // Non-interpolating side.
        if !active[3] {
            return 7;
        }
        if values[1] >= thresholds[3] {
            5
        } else {
            4
        }
    } else {
        if !active[1] {
            return 8;
        }
        if values[1] >= thresholds[1] {
            return 3;
        }
        if !active[2] {
            return 9;
        }
        if values[2] >= thresholds[2] {
            2
        } else {
            1
        }
    }
}

/// Whole-training-set accuracy of the partial tree: every position takes its
/// provisional majority label, so each position contributes its larger class
/// count.
fn partial_accuracy(
    values: &[[f64; 3]],
    positive: &[bool],
    thresholds: &[f64; 4],
    active: &[bool; 4],
) -> f64 {
    let mut pos = [0usize; 10];
    let mut neg = [0usize; 10];
    for (v, &is_pos) in values.iter().zip(positive) {
        let at = route_position(v, thresholds, active);
        if is_pos {
            pos[at] += 1;
        } else {
            neg[at] += 1;
        }
    }
    let correct: usize = pos.iter().zip(&neg).map(|(p, n)| p.max(n)).sum();
    correct as f64 / values.len() as f64
}

/// Node index -> index into the per-sample `[f64; 3]` value array.
fn value_index(node: usize) -> usize {
    match node {
        0 => 0,
        1 | 3 => 1,
        2 => 2,
        _ => unreachable!("fixed hierarchy has nodes 0..=3"),
    }
}

/// Indices of samples that reach `node` given the already-active ancestors.
fn reaching(values: &[[f64; 3]], thresholds: &[f64; 4], node: usize) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| match node {
            0 => true,
            1 => v[0] < thresholds[0],
            3 => v[0] >= thresholds[0],
            2 => v[0] < thresholds[0] && v[1] < thresholds[1],
            _ => unreachable!(),
        })
        .map(|(i, _)| i)
        .collect()
}

fn check_question(samples: &[DiagnosisSample]) -> Result<Question, DiagError> {
    let first = samples.first().ok_or(DiagError::EmptyTrainingSet)?;
    for sample in samples {
        if sample.question != first.question {
            return Err(DiagError::MixedQuestions {
                expected: first.question,
                found: sample.question,
            });
        }
    }
    Ok(first.question)
}

/// Fits the fixed-hierarchy tree on labeled samples. All samples must answer
/// the same question. With fewer than two classes present the model
/// degenerates to a constant majority predictor.
pub fn mdtree_fit(
    samples: &[DiagnosisSample],
    deep_metric: DeepMetric,
    fit_mode: FitMode,
) -> Result<MdTreeModel, DiagError> {
    let question = check_question(samples)?;
    let positive_label = question.positive_label();
    let negative_label = question.negative_label();
    let values: Vec<[f64; 3]> = samples
        .iter()
        .map(|s| node_values(&s.features, deep_metric))
        .collect::<Result<_, _>>()?;
    let positive: Vec<bool> = samples.iter().map(|s| s.label == positive_label).collect();
    let total_pos = positive.iter().filter(|&&p| p).count();
    let total_neg = samples.len() - total_pos;
    let majority = majority_label(total_pos, total_neg, total_pos, total_neg, question);

    let node_features = [
        SplitFeature::TrainError,
        SplitFeature::ConnectivityPct,
        deep_feature(deep_metric),
        SplitFeature::ConnectivityPct,
    ];
    let searches = node_features.map(|f| default_search(f, question));
    let mut thresholds = searches.map(|s| s.initial);
    let degenerate = total_pos == 0 || total_neg == 0;

    if !degenerate {
        let mut active = [false; 4];
        for node in FIT_ORDER {
            active[node] = true;
            let reach = reaching(&values, &thresholds, node);
            let vi = value_index(node);
            let mut feats: Vec<f64> = reach.iter().map(|&i| values[i][vi]).collect();
            feats.sort_by(f64::total_cmp);
            feats.dedup();
            if feats.len() < 2 {
                // Empty or constant subset: the node degenerates to its
                // initial threshold.
                thresholds[node] = searches[node].initial;
                continue;
            }
            let (lo, hi) = (searches[node].lower, searches[node].upper);
            let init = searches[node].initial.clamp(lo, hi);
            // A threshold only matters through the partition it induces on
            // the samples reaching this node, and those partitions are
            // nested: the right side is exactly the samples whose value is
            // >= tau, so it is determined by its size. The objective is
            // therefore cached per right-count, and both modes resolve
            // accuracy ties on the count scale: prefer the partition
            // closest to the initial threshold's, then the smaller right
            // side. Any two searches that reach the winning partition at
            // all thus return the same routing.
            let mut sorted_vals: Vec<f64> = reach.iter().map(|&i| values[i][vi]).collect();
            sorted_vals.sort_by(f64::total_cmp);
            let right_count =
                |tau: f64| sorted_vals.len() - sorted_vals.partition_point(|&v| v < tau);
            let k_init = right_count(init);
            // Per right-count: (objective value, representative threshold
            // nearest the initial value among those evaluated).
            let seen: RefCell<BTreeMap<usize, (f64, f64)>> = RefCell::new(BTreeMap::new());
            let visit = |tau: f64| -> f64 {
                let k = right_count(tau);
                let mut map = seen.borrow_mut();
                if let Some(entry) = map.get_mut(&k) {
                    if (tau - init).abs() < (entry.1 - init).abs() {
                        entry.1 = tau;
                    }
                    return entry.0;
                }
                let mut th = thresholds;
                th[node] = tau;
                let acc = partial_accuracy(&values, &positive, &th, &active);
                map.insert(k, (acc, tau));
                acc
            };
            let pick = || -> f64 {
                let map = seen.borrow();
                let mut best: Option<(f64, usize, f64)> = None;
                for (&k, &(acc, rep)) in map.iter() {
                    let closer = match best {
                        None => true,
                        Some((bacc, bk, _)) => {
                            acc > bacc
                                || (acc == bacc
                                    && k.abs_diff(k_init) < bk.abs_diff(k_init))
                        }
                    };
                    if closer {
                        best = Some((acc, k, rep));
                    }
                }
                best.expect("at least one candidate visited").2
            };
            thresholds[node] = match fit_mode {
                FitMode::Brent => {
                    // Coarse pre-scan at evenly spaced ranks (the objective
                    // is piecewise constant in the threshold, so rank space
                    // is where probes carry information), then a bounded
                    // local descent; every probe the descent makes lands in
                    // the same cache, so the final pick sees all of them.
                    visit(init);
                    visit(lo);
                    visit(hi);
                    let m = sorted_vals.len();
                    let (klo, khi) = (right_count(hi), right_count(lo));
                    for j in 0..=PRESCAN_INTERVALS {
                        let k = klo + j * (khi - klo) / PRESCAN_INTERVALS;
                        let tau = if k == 0 {
                            hi
                        } else if k >= m {
                            lo
                        } else {
                            0.5 * (sorted_vals[m - k - 1] + sorted_vals[m - k])
                        };
                        visit(tau.clamp(lo, hi));
                    }
                    let start = pick();
                    brent_min(|t| -visit(t), lo, hi, start, THRESHOLD_XATOL, BRENT_MAX_ITER);
                    pick()
                }
                FitMode::ExactScan => {
                    // Midpoints between consecutive sorted values cover
                    // every achievable partition strictly inside the
                    // bounds; the bounds cover the extreme ones.
                    visit(lo);
                    visit(init);
                    visit(hi);
                    for pair in feats.windows(2) {
                        let mid = 0.5 * (pair[0] + pair[1]);
                        if mid > lo && mid < hi {
                            visit(mid);
                        }
                    }
                    pick()
                }
            };
        }
    }

    // Final leaves: majority of the samples each leaf receives. Empty leaves
    // fall back to the global majority.
    let active = [true; 4];
    let mut pos = [0usize; 6];
    let mut neg = [0usize; 6];
    for (v, &is_pos) in values.iter().zip(&positive) {
        let regime = route_position(v, &thresholds, &active);
        if is_pos {
            pos[regime] += 1;
        } else {
            neg[regime] += 1;
        }
    }
    let leaves: [LeafNode; 5] = std::array::from_fn(|i| {
        let regime = (i + 1) as u8;
        let (p, n) = (pos[i + 1], neg[i + 1]);
        let label = if degenerate || p + n == 0 {
            majority
        } else {
            majority_label(p, n, total_pos, total_neg, question)
        };
        let mut counts = BTreeMap::new();
        counts.insert(positive_label, p);
        counts.insert(negative_label, n);
        LeafNode { regime, label, counts }
    });

    let correct = values
        .iter()
        .zip(&positive)
        .filter(|(v, &is_pos)| {
            let predicted = if degenerate {
                majority
            } else {
                leaves[route_position(v, &thresholds, &active) - 1].label
            };
            predicted == if is_pos { positive_label } else { negative_label }
        })
        .count();

    let nodes: [SplitNode; 4] = std::array::from_fn(|i| SplitNode {
        feature: node_features[i],
        threshold: thresholds[i],
        search: searches[i],
    });

    Ok(MdTreeModel {
        question,
        deep_metric,
        fit_mode,
        nodes,
        leaves,
        degenerate,
        majority,
        train_accuracy: correct as f64 / samples.len() as f64,
        train_size: samples.len(),
    })
}

impl MdTreeModel {
    /// Predicted label and the regime the sample lands in (0 for a
    /// degenerate constant model).
    pub fn predict(&self, features: &FeatureVector) -> Result<(Label, u8), DiagError> {
        let values = node_values(features, self.deep_metric)?;
        if self.degenerate {
            return Ok((self.majority, 0));
        }
        let thresholds = std::array::from_fn(|i| self.nodes[i].threshold);
        let regime = route_position(&values, &thresholds, &[true; 4]);
        let leaf = &self.leaves[regime - 1];
        Ok((leaf.label, leaf.regime))
    }

    /// Fraction of `samples` whose predicted label matches.
    pub fn accuracy(&self, samples: &[DiagnosisSample]) -> Result<f64, DiagError> {
        if samples.is_empty() {
            return Err(DiagError::EmptyTrainingSet);
        }
        let mut correct = 0usize;
        for sample in samples {
            if self.predict(&sample.features)?.0 == sample.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}
