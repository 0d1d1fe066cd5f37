//! Diagnosis of under-performing training runs over a grid of small MLP
//! classifiers.
//!
//! The pipeline has four stages, one module each:
//!
//! * [`zoo`] trains a grid of models (the "zoo") over width, batch size and
//!   data fraction, and measures loss-landscape metrics for every
//!   configuration via [`nnkit`] and [`landscape`].
//! * [`labeling`] turns the zoo into a supervised diagnosis dataset: each
//!   configuration is labeled with the hyperparameter axis whose adjustment
//!   would recover the most validation accuracy.
//! * [`diagnosis`] fits interpretable metric-threshold trees (and decision
//!   tree baselines) that predict those labels from landscape metrics.
//! * [`eval`] measures few-shot transfer of the fitted trees across dataset
//!   variants and grid scales, and scores one-step configuration changes.
//!
//! [`domain`] holds the shared record types and validation; [`nnkit`] is the
//! minimal neural-network layer (data generation, MLP, SGD training,
//! Hessian-vector products) everything above is built on.

pub mod diagnosis;
pub mod domain;
pub mod eval;
pub mod labeling;
pub mod landscape;
pub mod nnkit;
mod seedmix;
pub mod zoo;

pub use domain::{
    ConfigPoint, DatasetVariant, DiagnosisSample, FailureSource, FeatureVector, Label,
    MetricVector, Question, ZooRecord, ZooSpec,
};
pub use eval::{
    EvalError, EvalMethod, EvalRow, OneStepReport, OneStepRow, StepPolicy, TransferMode,
    PAPER_SEEDS,
};
