//! Room-for-improvement (RFI) computation and failure labeling.
//!
//! For a configuration f0 and a candidate fix m, RFI(m, f0) is the
//! validation-error gap between f0 and the best configuration on the axis
//! segment that m is allowed to search. The signed gap between competing
//! fixes yields the binary label for each diagnosis question; configurations
//! where the gap is exactly zero are already optimal and are excluded.

use crate::domain::{
    ConfigPoint, DiagnosisSample, FailureSource, FeatureVector, Label, Question, RecordStatus,
    ZooRecord,
};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("duplicate configuration (width {width}, batch {batch}, fraction {fraction})")]
    DuplicateConfig { width: usize, batch: usize, fraction: f64 },
    #[error("label unavailable for (width {width}, batch {batch}, fraction {fraction}): missing or failed grid point in the search range")]
    Unavailable { width: usize, batch: usize, fraction: f64 },
    #[error("no labelable configurations")]
    NoLabelable,
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: sample answers {found:?} but the file started with {expected:?}")]
    MixedQuestions {
        path: String,
        line: usize,
        found: Question,
        expected: Question,
    },
    #[error("{path}: no samples")]
    Empty { path: String },
}

type Key = (usize, usize, u64);

fn key_of(config: &ConfigPoint) -> Key {
    (config.width_p, config.batch_size_t, config.data_fraction_n.to_bits())
}

/// Index of a zoo by configuration key, with the grids inferred from the
/// records themselves. Failed records participate in the grids (their cell
/// exists) but have no usable validation error.
pub struct RecordTable<'a> {
    widths: Vec<usize>,
    batches: Vec<usize>,
    fractions: Vec<f64>,
    by_key: BTreeMap<Key, &'a ZooRecord>,
}

impl<'a> RecordTable<'a> {
    pub fn new(records: &'a [ZooRecord]) -> Result<Self, LabelError> {
        let mut by_key = BTreeMap::new();
        for record in records {
            match by_key.entry(key_of(&record.config)) {
                Entry::Vacant(slot) => {
                    slot.insert(record);
                }
                Entry::Occupied(_) => {
                    return Err(LabelError::DuplicateConfig {
                        width: record.config.width_p,
                        batch: record.config.batch_size_t,
                        fraction: record.config.data_fraction_n,
                    })
                }
            }
        }
        let mut widths: Vec<usize> = by_key.keys().map(|k| k.0).collect();
        widths.sort_unstable();
        widths.dedup();
        let mut batches: Vec<usize> = by_key.keys().map(|k| k.1).collect();
        batches.sort_unstable();
        batches.dedup();
        let mut fractions: Vec<f64> = by_key.keys().map(|k| f64::from_bits(k.2)).collect();
        fractions.sort_by(f64::total_cmp);
        fractions.dedup();
        Ok(RecordTable { widths, batches, fractions, by_key })
    }

    pub fn records(&self) -> impl Iterator<Item = &&'a ZooRecord> {
        self.by_key.values()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn batches(&self) -> &[usize] {
        &self.batches
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn get(&self, width: usize, batch: usize, fraction: f64) -> Option<&'a ZooRecord> {
        self.by_key.get(&(width, batch, fraction.to_bits())).copied()
    }

    /// Seed-averaged validation error, present only for ok records.
    pub fn val_error(&self, width: usize, batch: usize, fraction: f64) -> Option<f64> {
        let record = self.get(width, batch, fraction)?;
        if record.status != RecordStatus::Ok {
            return None;
        }
        record.metrics.as_ref().map(|m| m.val_error)
    }
}

/// Room for improvement of `source`'s fix at `config`: the current
/// validation error minus the best one on the searched axis segment.
/// The segment always contains the current configuration, so RFI >= 0.
pub fn rfi(
    table: &RecordTable,
    config: &ConfigPoint,
    source: FailureSource,
) -> Result<f64, LabelError> {
    let (w, b, f) = (config.width_p, config.batch_size_t, config.data_fraction_n);
    let unavailable = || LabelError::Unavailable { width: w, batch: b, fraction: f };
    let current = table.val_error(w, b, f).ok_or_else(unavailable)?;
    let segment: Vec<(usize, usize, f64)> = match source {
        FailureSource::ModelSize => {
            table.widths().iter().filter(|&&q| q >= w).map(|&q| (q, b, f)).collect()
        }
        FailureSource::DataAmount => {
            table.fractions().iter().filter(|&&q| q >= f).map(|&q| (w, b, q)).collect()
        }
        FailureSource::TLarge => {
            table.batches().iter().filter(|&&q| q <= b).map(|&q| (w, q, f)).collect()
        }
        FailureSource::TSmall => {
            table.batches().iter().filter(|&&q| q >= b).map(|&q| (w, q, f)).collect()
        }
    };
    let mut best = f64::INFINITY;
    for (qw, qb, qf) in segment {
        best = best.min(table.val_error(qw, qb, qf).ok_or_else(unavailable)?);
    }
    Ok(current - best)
}

/// Q1 gap: G = RFI(batch too large) - RFI(batch too small).
pub fn gap_q1(table: &RecordTable, config: &ConfigPoint) -> Result<f64, LabelError> {
    Ok(rfi(table, config, FailureSource::TLarge)? - rfi(table, config, FailureSource::TSmall)?)
}

/// Q2 gap: G = RFI(model size) - max of the two batch RFIs.
pub fn gap_q2(table: &RecordTable, config: &ConfigPoint) -> Result<f64, LabelError> {
    let rfi_t = rfi(table, config, FailureSource::TLarge)?
        .max(rfi(table, config, FailureSource::TSmall)?);
    Ok(rfi(table, config, FailureSource::ModelSize)? - rfi_t)
}

/// Q2-variant gap: G = RFI(data amount) - max of the two batch RFIs.
pub fn gap_q2n(table: &RecordTable, config: &ConfigPoint) -> Result<f64, LabelError> {
    let rfi_t = rfi(table, config, FailureSource::TLarge)?
        .max(rfi(table, config, FailureSource::TSmall)?);
    Ok(rfi(table, config, FailureSource::DataAmount)? - rfi_t)
}

pub fn gap(table: &RecordTable, config: &ConfigPoint, question: Question) -> Result<f64, LabelError> {
    match question {
        Question::Q1 => gap_q1(table, config),
        Question::Q2 => gap_q2(table, config),
        Question::Q2N => gap_q2n(table, config),
    }
}

/// Sign-of-gap labeling rule. An exact zero means the configuration is
/// already optimal for the question and yields no label.
pub fn label_for(question: Question, gap: f64) -> Option<Label> {
    if gap > 0.0 {
        Some(question.positive_label())
    } else if gap < 0.0 {
        Some(question.negative_label())
    } else {
        None
    }
}

/// A labeled diagnosis dataset plus the exclusion tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<DiagnosisSample>,
    /// Configs with gap exactly zero (already optimal for the question).
    pub excluded_optimal: usize,
    /// Failed configs, configs with unusable features, and configs whose
    /// search ranges contain a failed grid point.
    pub excluded_unavailable: usize,
}

/// Labels every labelable configuration of a zoo for one question. Samples
/// come out in configuration-key order.
pub fn build_dataset(records: &[ZooRecord], question: Question) -> Result<LabeledDataset, LabelError> {
    let table = RecordTable::new(records)?;
    let mut samples = Vec::new();
    let mut excluded_optimal = 0;
    let mut excluded_unavailable = 0;
    for record in table.records() {
        if record.status != RecordStatus::Ok {
            excluded_unavailable += 1;
            continue;
        }
        let Some(features) = FeatureVector::from_record(record) else {
            excluded_unavailable += 1;
            continue;
        };
        let gap_g = match gap(&table, &record.config, question) {
            Ok(g) => g,
            Err(LabelError::Unavailable { .. }) => {
                excluded_unavailable += 1;
                continue;
            }
            Err(other) => return Err(other),
        };
        match label_for(question, gap_g) {
            Some(label) => samples.push(DiagnosisSample {
                config: record.config.clone(),
                question,
                gap_g,
                label,
                features,
            }),
            None => excluded_optimal += 1,
        }
    }
    if samples.is_empty() {
        return Err(LabelError::NoLabelable);
    }
    Ok(LabeledDataset { samples, excluded_optimal, excluded_unavailable })
}

/// Writes labeled samples as one JSON object per line.
pub fn save_samples_jsonl(samples: &[DiagnosisSample], path: &Path) -> Result<(), LabelError> {
    let io_err = |source| LabelError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for sample in samples {
        let line = serde_json::to_string(sample).expect("sample serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads labeled samples; every sample must answer the same question.
pub fn load_samples_jsonl(path: &Path) -> Result<Vec<DiagnosisSample>, LabelError> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| LabelError::Io {
        path: path_str.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut samples: Vec<DiagnosisSample> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| LabelError::Io { path: path_str.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: DiagnosisSample =
            serde_json::from_str(&line).map_err(|source| LabelError::Parse {
                path: path_str.clone(),
                line: line_no,
                source,
            })?;
        if let Some(first) = samples.first() {
            if sample.question != first.question {
                return Err(LabelError::MixedQuestions {
                    path: path_str,
                    line: line_no,
                    found: sample.question,
                    expected: first.question,
                });
            }
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(LabelError::Empty { path: path_str });
    }
    Ok(samples)
}
