//! Synthetic 4-class Gaussian-mixture classification tasks.
//!
//! A task is fixed by its `task_seed`: class means are drawn once from it,
//! then samples are drawn from a separate stream. Each class is a balanced
//! mixture of [`SUBCLUSTERS`] tight isotropic clusters, so separating the
//! full arrangement takes real capacity: narrow models plateau well above
//! zero error while wide models drive it to zero. The `Clean` and
//! `LabelNoise10pct` variants of the same `(task_seed, samples)` pair share
//! inputs and differ in exactly `floor(0.10 * samples)` labels.

use crate::domain::DatasetVariant;
use crate::seedmix::{mix, tag};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const INPUT_DIM: usize = 8;
pub const NUM_CLASSES: usize = 4;

/// Clusters per class; the task has `NUM_CLASSES * SUBCLUSTERS` means.
const SUBCLUSTERS: usize = 4;
/// Spread of the cluster means around the origin.
const MEAN_SCALE: f64 = 1.4;
/// Per-dimension standard deviation of the within-cluster noise.
const NOISE_SIGMA: f64 = 0.25;
/// Magnitude of the global input offset for the `OodShift` variant.
const SHIFT_SCALE: f64 = 0.75;
const NOISE_FRACTION: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("requested {requested} samples, need at least {minimum} (one per class)")]
    TooFewSamples { requested: usize, minimum: usize },
}

/// A labeled sample set. `inputs` is samples x [`INPUT_DIM`].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub variant: DatasetVariant,
    pub task_seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copies the given rows into a dense batch.
    pub fn gather(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let mut inputs = Array2::zeros((indices.len(), self.inputs.ncols()));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &idx) in indices.iter().enumerate() {
            inputs.row_mut(row).assign(&self.inputs.row(idx));
            labels.push(self.labels[idx]);
        }
        (inputs, labels)
    }

    /// First `count` samples as an owned dataset. Prefixes of the same pool
    /// are nested, which keeps smaller data fractions subsets of larger ones.
    pub fn prefix(&self, count: usize) -> Dataset {
        assert!(count <= self.len(), "prefix {count} exceeds {}", self.len());
        Dataset {
            inputs: self.inputs.slice(ndarray::s![..count, ..]).to_owned(),
            labels: self.labels[..count].to_vec(),
            variant: self.variant,
            task_seed: self.task_seed,
        }
    }
}

/// Generates `samples` points for the task identified by `task_seed`.
pub fn gen_synthetic(
    task_seed: u64,
    samples: usize,
    variant: DatasetVariant,
) -> Result<Dataset, DataError> {
    gen_synthetic_stream(task_seed, samples, variant, 0)
}

/// Like [`gen_synthetic`] but draws samples from an independent stream of the
/// same task, so two streams never share points. Stream 0 is the default
/// training pool; the zoo uses a distinct stream for validation data.
pub fn gen_synthetic_stream(
    task_seed: u64,
    samples: usize,
    variant: DatasetVariant,
    stream: u64,
) -> Result<Dataset, DataError> {
    if samples < NUM_CLASSES {
        return Err(DataError::TooFewSamples { requested: samples, minimum: NUM_CLASSES });
    }

    let mut means = class_means(task_seed);
    if variant == DatasetVariant::OodShift {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[task_seed, tag::DATA_SHIFT]));
        let shift: Vec<f64> = (0..INPUT_DIM).map(|_| rng.random_range(-1.0..1.0) * SHIFT_SCALE).collect();
        for mut row in means.rows_mut() {
            for (m, s) in row.iter_mut().zip(&shift) {
                *m += s;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[task_seed, tag::DATA_SAMPLES, stream]));
    let mut inputs = Array2::zeros((samples, INPUT_DIM));
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % NUM_CLASSES;
        labels.push(class);
        let cluster = rng.random_range(0..SUBCLUSTERS);
        let row = class * SUBCLUSTERS + cluster;
        for d in 0..INPUT_DIM {
            let noise: f64 = rng.sample(StandardNormal);
            inputs[[i, d]] = means[[row, d]] + NOISE_SIGMA * noise;
        }
    }

    if variant == DatasetVariant::LabelNoise10pct {
        let flip_count = (NOISE_FRACTION * samples as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[task_seed, tag::DATA_NOISE, stream]));
        let picked = rand::seq::index::sample(&mut rng, samples, flip_count);
        for idx in picked {
            let offset = rng.random_range(1..NUM_CLASSES);
            labels[idx] = (labels[idx] + offset) % NUM_CLASSES;
        }
    }

    Ok(Dataset { inputs, labels, variant, task_seed })
}

fn class_means(task_seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[task_seed, tag::DATA_MEANS]));
    let mut means = Array2::zeros((NUM_CLASSES * SUBCLUSTERS, INPUT_DIM));
    for c in 0..NUM_CLASSES * SUBCLUSTERS {
        for d in 0..INPUT_DIM {
            means[[c, d]] = rng.random_range(-1.0..1.0) * MEAN_SCALE;
        }
    }
    means
}
