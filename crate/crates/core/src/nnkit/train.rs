//! Plain SGD training: shuffled minibatches, fixed learning rate, fixed
//! epoch count, no early stopping.

use super::data::Dataset;
use super::mlp::{MlpWeights, ModelShape};
use crate::seedmix::{mix, tag};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("batch size {batch} invalid for {samples} samples")]
    BatchInvalid { batch: usize, samples: usize },
    #[error("training diverged to non-finite weights at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Trains from the fan-in uniform initialization `MlpWeights::init(shape, seed)`.
/// The shuffle stream is derived from the same seed, so `learning_rate == 0`
/// returns exactly the initialization.
pub fn train(
    shape: ModelShape,
    data: &Dataset,
    batch_size: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<MlpWeights, TrainError> {
    let n = data.len();
    if batch_size == 0 || batch_size > n {
        return Err(TrainError::BatchInvalid { batch: batch_size, samples: n });
    }
    let mut weights = MlpWeights::init(shape, seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tag::TRAIN_SHUFFLE]));
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_inputs = Array2::zeros((batch_size, data.inputs.ncols()));
    let mut batch_labels = vec![0usize; batch_size];

    for epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch_size) {
            let b = chunk.len();
            for (row, &idx) in chunk.iter().enumerate() {
                batch_inputs.row_mut(row).assign(&data.inputs.row(idx));
                batch_labels[row] = data.labels[idx];
            }
            let view = batch_inputs.slice(ndarray::s![..b, ..]);
            let grad = weights.grad(view, &batch_labels[..b]);
            weights.scaled_add(-learning_rate, &grad);
        }
        if !weights.all_finite() {
            return Err(TrainError::Diverged { epoch });
        }
    }
    Ok(weights)
}
