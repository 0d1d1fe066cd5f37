//! Shared helpers for integration tests: an exhaustive reference labeler
//! written directly against the raw validation-error table, and a synthetic
//! labeled-sample generator with planted tree structure.
//!
//! Each test binary uses its own slice of these helpers.
#![allow(dead_code)]

use mdtree_core::domain::{
    ConfigPoint, DiagnosisSample, FeatureVector, Label, Question, RecordStatus, ZooRecord,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Reference labeling outcome for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum RefOutcome {
    /// A search range touches a hole in the grid, or the record itself is
    /// unusable.
    Unavailable,
    /// Gap exactly zero: nothing to fix.
    Optimal,
    Labeled { label: Label, gap: f64 },
}

/// The four single-axis fixes, spelled out for the reference labeler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefSource {
    WiderModel,
    MoreData,
    SmallerBatch,
    LargerBatch,
}

fn distinct_sorted_widths(records: &[ZooRecord]) -> Vec<usize> {
    let mut vals: Vec<usize> = records.iter().map(|r| r.config.width_p).collect();
    vals.sort_unstable();
    vals.dedup();
    vals
}

fn distinct_sorted_batches(records: &[ZooRecord]) -> Vec<usize> {
    let mut vals: Vec<usize> = records.iter().map(|r| r.config.batch_size_t).collect();
    vals.sort_unstable();
    vals.dedup();
    vals
}

fn distinct_sorted_fractions(records: &[ZooRecord]) -> Vec<f64> {
    let mut vals: Vec<f64> = records.iter().map(|r| r.config.data_fraction_n).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| a == b);
    vals
}

/// Seed-averaged validation error at a grid point, by linear scan. None when
/// the point is absent, failed, or carries no metrics.
fn ref_val_error(records: &[ZooRecord], width: usize, batch: usize, fraction: f64) -> Option<f64> {
    let record = records.iter().find(|r| {
        r.config.width_p == width
            && r.config.batch_size_t == batch
            && r.config.data_fraction_n == fraction
    })?;
    if record.status != RecordStatus::Ok {
        return None;
    }
    record.metrics.as_ref().map(|m| m.val_error)
}

/// Room for improvement of one fix at one configuration, by enumerating the
/// full axis segment. None when any point of the segment is unusable.
pub fn ref_rfi(
    records: &[ZooRecord],
    config: &ConfigPoint,
    source: RefSource,
) -> Option<f64> {
    let (w, b, f) = (config.width_p, config.batch_size_t, config.data_fraction_n);
    let current = ref_val_error(records, w, b, f)?;
    let segment: Vec<(usize, usize, f64)> = match source {
        RefSource::WiderModel => distinct_sorted_widths(records)
            .into_iter()
            .filter(|&q| q >= w)
            .map(|q| (q, b, f))
            .collect(),
        RefSource::MoreData => distinct_sorted_fractions(records)
            .into_iter()
            .filter(|&q| q >= f)
            .map(|q| (w, b, q))
            .collect(),
        RefSource::SmallerBatch => distinct_sorted_batches(records)
            .into_iter()
            .filter(|&q| q <= b)
            .map(|q| (w, q, f))
            .collect(),
        RefSource::LargerBatch => distinct_sorted_batches(records)
            .into_iter()
            .filter(|&q| q >= b)
            .map(|q| (w, q, f))
            .collect(),
    };
    let mut best = f64::INFINITY;
    for (qw, qb, qf) in segment {
        best = best.min(ref_val_error(records, qw, qb, qf)?);
    }
    Some(current - best)
}

/// Signed gap for a question, from the reference RFIs. None = unavailable.
pub fn ref_gap(records: &[ZooRecord], config: &ConfigPoint, question: Question) -> Option<f64> {
    let small = ref_rfi(records, config, RefSource::SmallerBatch)?;
    let large = ref_rfi(records, config, RefSource::LargerBatch)?;
    match question {
        Question::Q1 => Some(small - large),
        Question::Q2 => Some(ref_rfi(records, config, RefSource::WiderModel)? - small.max(large)),
        Question::Q2N => Some(ref_rfi(records, config, RefSource::MoreData)? - small.max(large)),
    }
}

/// Feature usability rule restated from the record fields: metrics present,
/// positive raw sharpness, every derived feature finite.
fn ref_features_usable(record: &ZooRecord) -> bool {
    let Some(m) = record.metrics.as_ref() else {
        return false;
    };
    if !(m.sharpness_trace > 0.0) {
        return false;
    }
    [
        m.train_error,
        m.val_error,
        m.train_loss,
        m.val_loss,
        m.connectivity_pct,
        m.sharpness_trace.log10(),
        m.similarity,
        record.config.width_p as f64,
        record.config.batch_size_t as f64,
        record.config.data_fraction_n,
    ]
    .iter()
    .all(|v| v.is_finite())
}

/// Full reference labeling of one configuration, including the usability
/// screen that precedes any RFI work.
pub fn ref_outcome(records: &[ZooRecord], record: &ZooRecord, question: Question) -> RefOutcome {
    if record.status != RecordStatus::Ok || !ref_features_usable(record) {
        return RefOutcome::Unavailable;
    }
    let Some(gap) = ref_gap(records, &record.config, question) else {
        return RefOutcome::Unavailable;
    };
    if gap > 0.0 {
        let label = match question {
            Question::Q1 => Label::TLarge,
            Question::Q2 => Label::ModelSize,
            Question::Q2N => Label::DataAmount,
        };
        RefOutcome::Labeled { label, gap }
    } else if gap < 0.0 {
        let label = match question {
            Question::Q1 => Label::TSmall,
            Question::Q2 | Question::Q2N => Label::Optimizer,
        };
        RefOutcome::Labeled { label, gap }
    } else {
        RefOutcome::Optimal
    }
}

/// Reference dataset: (config, label, gap) triples in configuration-key
/// order plus the two exclusion tallies.
pub fn ref_dataset(
    records: &[ZooRecord],
    question: Question,
) -> (Vec<(ConfigPoint, Label, f64)>, usize, usize) {
    let mut ordered: Vec<&ZooRecord> = records.iter().collect();
    ordered.sort_by(|a, b| {
        (a.config.width_p, a.config.batch_size_t, a.config.data_fraction_n.to_bits()).cmp(&(
            b.config.width_p,
            b.config.batch_size_t,
            b.config.data_fraction_n.to_bits(),
        ))
    });
    let mut labeled = Vec::new();
    let mut optimal = 0;
    let mut unavailable = 0;
    for record in ordered {
        match ref_outcome(records, record, question) {
            RefOutcome::Unavailable => unavailable += 1,
            RefOutcome::Optimal => optimal += 1,
            RefOutcome::Labeled { label, gap } => {
                labeled.push((record.config.clone(), label, gap));
            }
        }
    }
    (labeled, optimal, unavailable)
}

/// Labeled samples drawn from a planted two-level threshold structure with
/// 10% label noise. The planted thresholds sit inside the tree's search
/// boxes, so fitted trees have real structure to find; the noise keeps the
/// objective from saturating at a single plateau.
pub fn structured_instance(seed: u64, n: usize) -> Vec<DiagnosisSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = rng.random_range(0.2..0.8);
    let t1 = rng.random_range(-25.0..-5.0);
    let t2 = rng.random_range(4.5..8.5);
    let t3 = rng.random_range(-25.0..-5.0);
    let leaves: [bool; 5] = std::array::from_fn(|_| rng.random::<bool>());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let te = rng.random_range(0.0..1.0);
        let c = rng.random_range(-30.0..0.0);
        let sh = rng.random_range(4.0..9.0);
        let si = rng.random_range(0.2..1.0);
        let regime = if te >= t0 {
            if c >= t3 { 4 } else { 3 }
        } else if c >= t1 {
            2
        } else if sh >= t2 {
            1
        } else {
            0
        };
        let mut positive = leaves[regime];
        if rng.random::<f64>() < 0.10 {
            positive = !positive;
        }
        let label = if positive { Label::TLarge } else { Label::TSmall };
        samples.push(DiagnosisSample {
            config: ConfigPoint {
                width_p: 2 + i,
                batch_size_t: 4,
                data_fraction_n: 0.5,
                seed_group: vec![0],
            },
            question: Question::Q1,
            gap_g: if positive { 1.0 } else { -1.0 },
            label,
            features: FeatureVector {
                train_error: te,
                val_error: (te + 0.05).min(1.0),
                train_loss: te,
                val_loss: te + 0.05,
                connectivity_pct: c,
                sharpness_log10: sh,
                similarity: si,
                width_p: (2 + i) as f64,
                batch_size_t: 4.0,
                data_fraction_n: 0.5,
            },
        });
    }
    samples
}
