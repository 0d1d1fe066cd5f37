//! Minimal neural-network layer: synthetic data, a one-hidden-layer MLP,
//! plain SGD training, and Hessian-vector products by finite differences.
//!
//! Everything is f64 and deterministic given its seeds. The rest of the
//! pipeline treats this module as the only place that touches model
//! internals.

pub mod data;
pub mod hvp;
pub mod mlp;
pub mod train;

pub use data::{gen_synthetic, gen_synthetic_stream, DataError, Dataset, INPUT_DIM, NUM_CLASSES};
pub use hvp::{hvp_with, mlp_hvp, HvpError};
pub use mlp::{Activation, MlpWeights, ModelShape};
pub use train::{train, TrainError};
