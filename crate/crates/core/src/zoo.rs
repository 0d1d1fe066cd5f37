//! The model zoo: a full sweep over the (width, batch size, data fraction)
//! grid, training every configuration at every seed and measuring the
//! landscape metrics, plus JSONL persistence with validation.
//!
//! A sweep is a pure function of `(spec, task_seed)`: records come back
//! sorted by configuration key and are byte-identical across runs and
//! worker counts.

use crate::domain::{
    spec_hash, validate_record, ConfigPoint, DatasetVariant, MetricVector, PerSeedMetrics,
    Provenance, RecordStatus, SpecError, Violation, ZooRecord, ZooSpec,
};
use crate::landscape::{
    cka_similarity, hutchinson_trace, mode_connectivity, top_eigenvalue, CurveSpec, ProbeSpec,
};
use crate::nnkit::{gen_synthetic, gen_synthetic_stream, DataError, Dataset, ModelShape, INPUT_DIM, NUM_CLASSES};
use crate::seedmix::{config_parts, mix, tag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

/// Measurement budgets shared by every configuration of a sweep. The curve's
/// SGD batch and learning rate are overridden per configuration to mirror
/// the configuration being measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub curve: CurveSpec,
    pub probes: ProbeSpec,
    pub cka_samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            curve: CurveSpec::default(),
            probes: ProbeSpec::default(),
            cka_samples: 256,
        }
    }
}

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("invalid zoo spec: {0}")]
    Spec(#[from] SpecError),
    #[error("data generation failed: {0}")]
    Data(#[from] DataError),
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
    #[error("{path}:{line}: spec hash mismatch: record carries {found}, expected {expected}")]
    SpecHashMismatch {
        path: String,
        line: usize,
        found: String,
        expected: String,
    },
    #[error("{path}:{line}: invalid record: {}", first_violation(.violations))]
    InvalidRecord {
        path: String,
        line: usize,
        violations: Vec<Violation>,
    },
    #[error("{path}: no records")]
    Empty { path: String },
}

fn first_violation(violations: &[Violation]) -> String {
    violations
        .first()
        .map(|v| v.to_string())
        .unwrap_or_else(|| "unknown violation".into())
}

/// Runs the full sweep with default measurement options.
pub fn sweep(spec: &ZooSpec, task_seed: u64) -> Result<Vec<ZooRecord>, ZooError> {
    sweep_with(spec, task_seed, &SweepOptions::default())
}

/// Runs the full sweep. Every grid cell yields exactly one record; cells
/// whose training or metric measurement fails are kept with `status =
/// failed` and `metrics = null`. Validation data is always clean and shared
/// by every configuration.
pub fn sweep_with(
    spec: &ZooSpec,
    task_seed: u64,
    options: &SweepOptions,
) -> Result<Vec<ZooRecord>, ZooError> {
    spec.validate()?;
    let pool = gen_synthetic(task_seed, spec.budget.pool_size, spec.dataset_variant)?;
    let val = gen_synthetic_stream(
        task_seed,
        spec.budget.val_size,
        DatasetVariant::Clean,
        tag::VAL_STREAM,
    )?;

    let mut subsets: BTreeMap<u64, Dataset> = BTreeMap::new();
    for &fraction in &spec.fraction_grid {
        let count = (fraction * spec.budget.pool_size as f64).floor() as usize;
        subsets.insert(fraction.to_bits(), pool.prefix(count.min(pool.len())));
    }

    let provenance = Provenance {
        zoo_id: format!("zoo-{}-{}", spec.dataset_variant.as_str(), task_seed),
        dataset_variant: spec.dataset_variant,
        spec_hash: spec_hash(spec),
    };

    let mut triples = Vec::new();
    for &w in &spec.width_grid {
        for &b in &spec.batch_grid {
            for &f in &spec.fraction_grid {
                triples.push((w, b, f));
            }
        }
    }

    let mut records: Vec<ZooRecord> = triples
        .par_iter()
        .map(|&(width, batch, fraction)| {
            let subset = &subsets[&fraction.to_bits()];
            run_config(spec, options, task_seed, width, batch, fraction, subset, &val, &provenance)
        })
        .collect();
    // Parallel collect preserves input order, which is already sorted; the
    // explicit sort makes the output contract independent of that detail.
    records.sort_by(|a, b| a.config.sort_key().cmp(&b.config.sort_key()));
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn run_config(
    spec: &ZooSpec,
    options: &SweepOptions,
    task_seed: u64,
    width: usize,
    batch: usize,
    fraction: f64,
    subset: &Dataset,
    val: &Dataset,
    provenance: &Provenance,
) -> ZooRecord {
    let config = ConfigPoint {
        width_p: width,
        batch_size_t: batch,
        data_fraction_n: fraction,
        seed_group: spec.seeds.clone(),
    };
    let (metrics, per_seed) =
        measure_config(spec, options, task_seed, &config, subset, val);
    let status = if metrics.is_some() { RecordStatus::Ok } else { RecordStatus::Failed };
    ZooRecord { config, metrics, per_seed, provenance: provenance.clone(), status }
}

/// Trains and measures one configuration. Returns `(None, partial)` when any
/// per-seed training run or any required metric fails.
fn measure_config(
    spec: &ZooSpec,
    options: &SweepOptions,
    task_seed: u64,
    config: &ConfigPoint,
    subset: &Dataset,
    val: &Dataset,
) -> (Option<MetricVector>, Vec<PerSeedMetrics>) {
    let shape = ModelShape::new(INPUT_DIM, config.width_p, NUM_CLASSES);
    let cfg_parts = config_parts(config.width_p, config.batch_size_t, config.data_fraction_n);
    let budget = &spec.budget;
    if subset.len() < NUM_CLASSES {
        return (None, Vec::new());
    }

    let mut per_seed = Vec::with_capacity(spec.seeds.len());
    let mut weights_by_seed = BTreeMap::new();
    for &seed in &spec.seeds {
        let weights = match crate::nnkit::train(
            shape,
            subset,
            config.batch_size_t,
            budget.epochs,
            budget.learning_rate,
            seed,
        ) {
            Ok(w) => w,
            Err(_) => return (None, per_seed),
        };
        let (train_loss, train_error) = weights.loss_and_error(subset.inputs.view(), &subset.labels);
        let (val_loss, val_error) = weights.loss_and_error(val.inputs.view(), &val.labels);
        let metric_seed = |purpose: u64| {
            mix(&[task_seed, cfg_parts[0], cfg_parts[1], cfg_parts[2], seed, purpose])
        };
        let sharpness_trace =
            match hutchinson_trace(&weights, subset, &options.probes, metric_seed(tag::HUTCHINSON)) {
                Ok(v) if v.is_finite() => v,
                _ => return (None, per_seed),
            };
        let sharpness_eig =
            top_eigenvalue(&weights, subset, &options.probes, metric_seed(tag::POWER_ITER))
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0);
        per_seed.push(PerSeedMetrics {
            seed,
            train_error,
            val_error,
            train_loss,
            val_loss,
            sharpness_trace,
            sharpness_eig,
        });
        weights_by_seed.insert(seed, weights);
    }

    // Pairwise metrics come from the lowest two seeds.
    let mut sorted_seeds: Vec<u64> = spec.seeds.clone();
    sorted_seeds.sort_unstable();
    let (s0, s1) = (sorted_seeds[0], sorted_seeds[1]);
    let pair_seed = |purpose: u64| mix(&[task_seed, cfg_parts[0], cfg_parts[1], cfg_parts[2], purpose]);
    // The curve trains with its own fixed batch size rather than the
    // configuration's: a starved configuration would otherwise starve its
    // curve too, and the score would measure the config's step budget
    // instead of the landscape between the endpoints.
    let curve = CurveSpec {
        sgd_lr: budget.learning_rate,
        ..options.curve.clone()
    };
    let connectivity_pct = match mode_connectivity(
        &weights_by_seed[&s0],
        &weights_by_seed[&s1],
        subset,
        &curve,
        pair_seed(tag::CURVE),
    ) {
        Ok(c) => c,
        Err(_) => return (None, per_seed),
    };
    let similarity = match cka_similarity(
        &weights_by_seed[&s0],
        &weights_by_seed[&s1],
        subset,
        options.cka_samples,
        pair_seed(tag::CKA),
    ) {
        Ok(s) => s,
        Err(_) => return (None, per_seed),
    };

    let n = per_seed.len() as f64;
    let mean = |f: fn(&PerSeedMetrics) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    let sharpness_trace = mean(|p| p.sharpness_trace);
    if !(sharpness_trace > 0.0) {
        // A non-positive aggregate trace would make the log-sharpness
        // feature undefined; treat the configuration as unmeasurable.
        return (None, per_seed);
    }
    let sharpness_eig = per_seed
        .iter()
        .map(|p| p.sharpness_eig)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n);
    let metrics = MetricVector {
        train_error: mean(|p| p.train_error),
        val_error: mean(|p| p.val_error),
        train_loss: mean(|p| p.train_loss),
        val_loss: mean(|p| p.val_loss),
        connectivity_pct,
        sharpness_trace,
        sharpness_eig,
        similarity,
    };
    (Some(metrics), per_seed)
}

/// Writes records as one JSON object per line, in the given order.
pub fn save_jsonl(records: &[ZooRecord], path: &Path) -> Result<(), ZooError> {
    let io_err = |source| ZooError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a zoo file. All records must carry the same spec hash. When `spec`
/// is given, the hash must match it and every record must satisfy the record
/// invariants; the first violation aborts the load.
pub fn load_jsonl(path: &Path, spec: Option<&ZooSpec>) -> Result<Vec<ZooRecord>, ZooError> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| ZooError::Io {
        path: path_str.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let expected_hash = spec.map(spec_hash);
    let mut records = Vec::new();
    let mut file_hash: Option<String> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| ZooError::Io { path: path_str.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ZooRecord = serde_json::from_str(&line).map_err(|source| ZooError::Parse {
            path: path_str.clone(),
            line: line_no,
            source,
        })?;
        let hash = &record.provenance.spec_hash;
        let reference = file_hash.get_or_insert_with(|| hash.clone());
        if hash != reference {
            return Err(ZooError::SpecHashMismatch {
                path: path_str,
                line: line_no,
                found: hash.clone(),
                expected: reference.clone(),
            });
        }
        if let Some(expected) = &expected_hash {
            if hash != expected {
                return Err(ZooError::SpecHashMismatch {
                    path: path_str,
                    line: line_no,
                    found: hash.clone(),
                    expected: expected.clone(),
                });
            }
        }
        if let Some(spec) = spec {
            let violations = validate_record(&record, spec);
            if !violations.is_empty() {
                return Err(ZooError::InvalidRecord { path: path_str, line: line_no, violations });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(ZooError::Empty { path: path_str });
    }
    Ok(records)
}
