//! Shared record types for the configuration zoo and the diagnosis dataset,
//! plus spec and record validation.
//!
//! Field names and field order of the serde derives define the on-disk JSONL
//! schema, so changes here are format changes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Which synthetic dataset a zoo was trained on.
///
/// `OodShift` exists only for the data generator; zoo specs accept `Clean`
/// and `LabelNoise10pct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetVariant {
    Clean,
    #[serde(rename = "label_noise_10pct")]
    LabelNoise10pct,
    OodShift,
}

impl DatasetVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetVariant::Clean => "clean",
            DatasetVariant::LabelNoise10pct => "label_noise_10pct",
            DatasetVariant::OodShift => "ood_shift",
        }
    }
}

/// One cell of the sweep grid: the three varied hyperparameters plus the
/// training seeds run at that cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub width_p: usize,
    pub batch_size_t: usize,
    pub data_fraction_n: f64,
    #[serde(rename = "seeds")]
    pub seed_group: Vec<u64>,
}

impl ConfigPoint {
    /// Canonical ordering key: (width, batch, fraction). Fractions are
    /// positive, so their bit patterns order like the values.
    pub fn sort_key(&self) -> (usize, usize, u64) {
        (self.width_p, self.batch_size_t, self.data_fraction_n.to_bits())
    }
}

/// Shared training budget for every configuration in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBudget {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Size of the training pool; `data_fraction_n` selects a prefix of it.
    pub pool_size: usize,
    /// Size of the held-out validation set (always clean labels).
    pub val_size: usize,
}

impl Default for TrainingBudget {
    fn default() -> Self {
        // Calibrated so the default grids produce every failure mode: narrow
        // widths plateau far above the Bayes error, large batches stay
        // undertrained on the small data fractions, and the wide full-data
        // rows converge with a visible optimum in the middle of the batch
        // grid.
        TrainingBudget {
            epochs: 30,
            learning_rate: 0.5,
            pool_size: 1024,
            val_size: 4096,
        }
    }
}

/// Full description of a sweep: the three grids, the seed group, the dataset
/// variant, and the training budget. Axis bounds (`p_max` and friends) are
/// derived from the grids, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZooSpec {
    pub width_grid: Vec<usize>,
    pub batch_grid: Vec<usize>,
    pub fraction_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub dataset_variant: DatasetVariant,
    #[serde(default)]
    pub budget: TrainingBudget,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("{0} grid is not strictly increasing")]
    NotStrictlyIncreasing(&'static str),
    #[error("data fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error("width grid entries must be at least 1")]
    ZeroWidth,
    #[error("batch grid entries must be at least 1")]
    ZeroBatch,
    #[error("need at least 2 seeds for pairwise metrics, got {0}")]
    TooFewSeeds(usize),
    #[error("duplicate seed {0}")]
    DuplicateSeed(u64),
    #[error("dataset variant {0} is not allowed in a zoo spec")]
    UnsupportedVariant(&'static str),
    #[error("training budget invalid: {0}")]
    BadBudget(String),
}

impl ZooSpec {
    /// Default desk-scale sweep: 6 widths x 6 batch sizes x 5 fractions,
    /// 3 seeds per cell.
    pub fn desk_default(variant: DatasetVariant) -> Self {
        ZooSpec {
            width_grid: vec![2, 4, 8, 16, 32, 64],
            batch_grid: vec![4, 8, 16, 32, 64, 128],
            fraction_grid: vec![0.125, 0.25, 0.5, 0.75, 1.0],
            seeds: vec![0, 1, 2],
            dataset_variant: variant,
            budget: TrainingBudget::default(),
        }
    }

    pub fn p_max(&self) -> usize {
        *self.width_grid.last().expect("validated: non-empty")
    }

    pub fn t_min(&self) -> usize {
        *self.batch_grid.first().expect("validated: non-empty")
    }

    pub fn t_max(&self) -> usize {
        *self.batch_grid.last().expect("validated: non-empty")
    }

    pub fn n_max(&self) -> f64 {
        *self.fraction_grid.last().expect("validated: non-empty")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
            xs.windows(2).all(|w| w[0] < w[1])
        }
        if self.width_grid.is_empty() {
            return Err(SpecError::EmptyGrid("width"));
        }
        if self.batch_grid.is_empty() {
            return Err(SpecError::EmptyGrid("batch"));
        }
        if self.fraction_grid.is_empty() {
            return Err(SpecError::EmptyGrid("fraction"));
        }
        if !strictly_increasing(&self.width_grid) {
            return Err(SpecError::NotStrictlyIncreasing("width"));
        }
        if !strictly_increasing(&self.batch_grid) {
            return Err(SpecError::NotStrictlyIncreasing("batch"));
        }
        if !strictly_increasing(&self.fraction_grid) {
            return Err(SpecError::NotStrictlyIncreasing("fraction"));
        }
        if self.width_grid[0] == 0 {
            return Err(SpecError::ZeroWidth);
        }
        if self.batch_grid[0] == 0 {
            return Err(SpecError::ZeroBatch);
        }
        for &f in &self.fraction_grid {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SpecError::FractionOutOfRange(f));
            }
        }
        if self.seeds.len() < 2 {
            return Err(SpecError::TooFewSeeds(self.seeds.len()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(SpecError::DuplicateSeed(w[0]));
        }
        if self.dataset_variant == DatasetVariant::OodShift {
            return Err(SpecError::UnsupportedVariant(self.dataset_variant.as_str()));
        }
        let b = &self.budget;
        if b.epochs == 0 {
            return Err(SpecError::BadBudget("epochs must be at least 1".into()));
        }
        if !(b.learning_rate.is_finite() && b.learning_rate >= 0.0) {
            return Err(SpecError::BadBudget(format!(
                "learning rate {} must be finite and non-negative",
                b.learning_rate
            )));
        }
        if b.pool_size == 0 || b.val_size == 0 {
            return Err(SpecError::BadBudget("pool and validation sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Hex SHA-256 digest of the canonical JSON encoding of a spec. Stored in
/// every record's provenance so mixed files are detectable.
pub fn spec_hash(spec: &ZooSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("hex write");
    }
    out
}

/// Seed-aggregated metrics for one configuration.
///
/// Errors and losses are fractions (not percent). `connectivity_pct` is in
/// percent points and non-positive. `sharpness_trace` is the Hutchinson
/// estimate of the training-loss Hessian trace; `sharpness_eig` the top
/// eigenvalue when power iteration converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub train_error: f64,
    pub val_error: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub connectivity_pct: f64,
    pub sharpness_trace: f64,
    pub sharpness_eig: Option<f64>,
    pub similarity: f64,
}

/// Raw per-seed measurements kept for traceability and aggregation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSeedMetrics {
    pub seed: u64,
    pub train_error: f64,
    pub val_error: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub sharpness_trace: f64,
    pub sharpness_eig: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub zoo_id: String,
    pub dataset_variant: DatasetVariant,
    pub spec_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

/// One line of a zoo JSONL file. `metrics` is `null` exactly when
/// `status == failed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooRecord {
    pub config: ConfigPoint,
    pub metrics: Option<MetricVector>,
    pub per_seed: Vec<PerSeedMetrics>,
    pub provenance: Provenance,
    pub status: RecordStatus,
}

/// The candidate hyperparameter fixes considered by the labeler. Each names
/// the axis segment searched when computing its room for improvement:
/// `ModelSize` searches widths at or above the current one, `DataAmount`
/// fractions at or above, `TLarge` batch sizes at or below (the fix for a
/// too-large batch), `TSmall` batch sizes at or above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureSource {
    TSmall,
    TLarge,
    ModelSize,
    DataAmount,
}

/// Which binary diagnosis question a dataset answers.
///
/// * `Q1`: is the batch size too large or too small?
/// * `Q2`: is the bottleneck model size or the optimizer (batch size)?
/// * `Q2N`: is the bottleneck data amount or the optimizer?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Question {
    Q1,
    Q2,
    Q2N,
}

impl Question {
    /// Stable lowercase identifier used in file formats and CLI flags.
    pub fn id(self) -> &'static str {
        match self {
            Question::Q1 => "q1",
            Question::Q2 => "q2",
            Question::Q2N => "q2n",
        }
    }

    /// Inverse of [`Question::id`].
    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "q1" => Some(Question::Q1),
            "q2" => Some(Question::Q2),
            "q2n" => Some(Question::Q2N),
            _ => None,
        }
    }

    /// Label assigned when the labeling gap G is positive.
    pub fn positive_label(self) -> Label {
        match self {
            Question::Q1 => Label::TLarge,
            Question::Q2 => Label::ModelSize,
            Question::Q2N => Label::DataAmount,
        }
    }

    /// Label assigned when G is negative; also the deterministic tie fallback.
    pub fn negative_label(self) -> Label {
        match self {
            Question::Q1 => Label::TSmall,
            Question::Q2 | Question::Q2N => Label::Optimizer,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Question::Q1 => "q1",
            Question::Q2 => "q2",
            Question::Q2N => "q2n",
        }
    }
}

/// Binary diagnosis outcome. Which pair is in play depends on the question;
/// `Optimizer` means "adjust the batch size" without fixing the direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    TSmall,
    TLarge,
    ModelSize,
    DataAmount,
    Optimizer,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::TSmall => "t_small",
            Label::TLarge => "t_large",
            Label::ModelSize => "model_size",
            Label::DataAmount => "data_amount",
            Label::Optimizer => "optimizer",
        }
    }
}

/// Everything a diagnosis model may condition on. Built from an ok record;
/// `sharpness_log10` is `log10(sharpness_trace)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub train_error: f64,
    pub val_error: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub connectivity_pct: f64,
    pub sharpness_log10: f64,
    pub similarity: f64,
    pub width_p: f64,
    pub batch_size_t: f64,
    pub data_fraction_n: f64,
}

impl FeatureVector {
    /// Returns `None` when the record has no metrics or the sharpness trace
    /// is not positive (its log would be undefined).
    pub fn from_record(record: &ZooRecord) -> Option<Self> {
        let m = record.metrics.as_ref()?;
        if !(m.sharpness_trace > 0.0) {
            return None;
        }
        let fv = FeatureVector {
            train_error: m.train_error,
            val_error: m.val_error,
            train_loss: m.train_loss,
            val_loss: m.val_loss,
            connectivity_pct: m.connectivity_pct,
            sharpness_log10: m.sharpness_trace.log10(),
            similarity: m.similarity,
            width_p: record.config.width_p as f64,
            batch_size_t: record.config.batch_size_t as f64,
            data_fraction_n: record.config.data_fraction_n,
        };
        fv.all_finite().then_some(fv)
    }

    fn all_finite(&self) -> bool {
        [
            self.train_error,
            self.val_error,
            self.train_loss,
            self.val_loss,
            self.connectivity_pct,
            self.sharpness_log10,
            self.similarity,
            self.width_p,
            self.batch_size_t,
            self.data_fraction_n,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// One labeled example for a diagnosis question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisSample {
    pub config: ConfigPoint,
    pub question: Question,
    #[serde(rename = "gap_G")]
    pub gap_g: f64,
    pub label: Label,
    pub features: FeatureVector,
}

/// One failed invariant found by [`validate_record`]. `invariant` is a short
/// stable name suitable for matching in tests and error output.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Checks one record against the spec that allegedly generated it. Returns
/// every violated invariant, empty when the record is well-formed.
pub fn validate_record(record: &ZooRecord, spec: &ZooSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let cfg = &record.config;

    if !spec.width_grid.contains(&cfg.width_p) {
        out.push(Violation {
            invariant: "off-grid",
            detail: format!("width_p = {} not in width grid", cfg.width_p),
        });
    }
    if !spec.batch_grid.contains(&cfg.batch_size_t) {
        out.push(Violation {
            invariant: "off-grid",
            detail: format!("batch_size_t = {} not in batch grid", cfg.batch_size_t),
        });
    }
    if !spec.fraction_grid.iter().any(|&f| f == cfg.data_fraction_n) {
        out.push(Violation {
            invariant: "off-grid",
            detail: format!("data_fraction_n = {} not in fraction grid", cfg.data_fraction_n),
        });
    }
    if cfg.seed_group != spec.seeds {
        out.push(Violation {
            invariant: "seed-group mismatch",
            detail: format!("record seeds {:?} != spec seeds {:?}", cfg.seed_group, spec.seeds),
        });
    }
    let expected_hash = spec_hash(spec);
    if record.provenance.spec_hash != expected_hash {
        out.push(Violation {
            invariant: "spec-hash mismatch",
            detail: format!(
                "record hash {} != spec hash {}",
                record.provenance.spec_hash, expected_hash
            ),
        });
    }
    if record.provenance.dataset_variant != spec.dataset_variant {
        out.push(Violation {
            invariant: "variant mismatch",
            detail: format!(
                "record variant {} != spec variant {}",
                record.provenance.dataset_variant.as_str(),
                spec.dataset_variant.as_str()
            ),
        });
    }

    match (&record.status, &record.metrics) {
        (RecordStatus::Ok, None) => out.push(Violation {
            invariant: "missing metrics",
            detail: "status is ok but metrics are null".into(),
        }),
        (RecordStatus::Ok, Some(m)) => {
            validate_metrics(m, &mut out);
            validate_per_seed(record, m, &mut out);
        }
        (RecordStatus::Failed, _) => {}
    }
    out
}

fn validate_metrics(m: &MetricVector, out: &mut Vec<Violation>) {
    let frac = |name: &'static str, v: f64, out: &mut Vec<Violation>| {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            out.push(Violation {
                invariant: "error out of range",
                detail: format!("{name} = {v} outside [0, 1]"),
            });
        }
    };
    frac("train_error", m.train_error, out);
    frac("val_error", m.val_error, out);
    for (name, v) in [("train_loss", m.train_loss), ("val_loss", m.val_loss)] {
        if !(v.is_finite() && v >= 0.0) {
            out.push(Violation {
                invariant: "loss out of range",
                detail: format!("{name} = {v} must be finite and non-negative"),
            });
        }
    }
    if !(m.connectivity_pct.is_finite() && m.connectivity_pct <= 0.0) {
        out.push(Violation {
            invariant: "connectivity must be <= 0",
            detail: format!("connectivity_pct = {}", m.connectivity_pct),
        });
    } else if m.connectivity_pct < -100.0 {
        out.push(Violation {
            invariant: "connectivity out of range",
            detail: format!("connectivity_pct = {} below -100", m.connectivity_pct),
        });
    }
    if !(m.sharpness_trace.is_finite() && m.sharpness_trace > 0.0) {
        out.push(Violation {
            invariant: "sharpness must be positive",
            detail: format!("sharpness_trace = {}", m.sharpness_trace),
        });
    }
    if let Some(eig) = m.sharpness_eig {
        if !(eig.is_finite() && eig > 0.0) {
            out.push(Violation {
                invariant: "sharpness must be positive",
                detail: format!("sharpness_eig = {eig}"),
            });
        }
    }
    if !(m.similarity.is_finite() && (-1.0..=1.0).contains(&m.similarity)) {
        out.push(Violation {
            invariant: "similarity out of range",
            detail: format!("similarity = {} outside [-1, 1]", m.similarity),
        });
    }
}

fn validate_per_seed(record: &ZooRecord, m: &MetricVector, out: &mut Vec<Violation>) {
    let seeds: Vec<u64> = record.per_seed.iter().map(|p| p.seed).collect();
    if seeds != record.config.seed_group {
        out.push(Violation {
            invariant: "per-seed seeds mismatch",
            detail: format!("per_seed seeds {:?} != config seeds {:?}", seeds, record.config.seed_group),
        });
        return;
    }
    if record.per_seed.is_empty() {
        return;
    }
    let n = record.per_seed.len() as f64;
    let mean = |f: fn(&PerSeedMetrics) -> f64| record.per_seed.iter().map(f).sum::<f64>() / n;
    let checks = [
        ("train_error", m.train_error, mean(|p| p.train_error)),
        ("val_error", m.val_error, mean(|p| p.val_error)),
        ("train_loss", m.train_loss, mean(|p| p.train_loss)),
        ("val_loss", m.val_loss, mean(|p| p.val_loss)),
        ("sharpness_trace", m.sharpness_trace, mean(|p| p.sharpness_trace)),
    ];
    for (name, agg, expect) in checks {
        if (agg - expect).abs() > 1e-12 {
            out.push(Violation {
                invariant: "per-seed mean mismatch",
                detail: format!("{name} = {agg} but per-seed mean is {expect}"),
            });
        }
    }
}
