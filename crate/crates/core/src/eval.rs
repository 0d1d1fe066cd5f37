//! Few-shot transfer evaluation and one-step configuration changes.
//!
//! Transfer evaluation fits each diagnostic method on a split of a labeled
//! training pool and scores it on the full test pool of the other dataset
//! variant. One-step evaluation applies a diagnosis to every labeled config
//! of a zoo, moves the indicated hyperparameter along its grid, and reports
//! the mean validation-accuracy improvement in percentage points.

use crate::diagnosis::{
    cart_fit, mdtree_fit, optimal_diagnosis, random_diagnosis, DeepMetric, DiagError,
    FeaturePolicy, FitMode, FittedModel,
};
use crate::domain::{ConfigPoint, DiagnosisSample, Label, Question, ZooRecord};
use crate::labeling::{build_dataset, gap, LabelError, RecordTable};
use crate::seedmix::{mix, tag};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Seeds used for every reported repetition.
pub const PAPER_SEEDS: [u64; 5] = [42, 90, 38, 18, 72];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("training pool is empty")]
    EmptyTrainPool,
    #[error("test pool is empty")]
    EmptyTestPool,
    #[error("shot count {shot} not in 1..={pool}")]
    InvalidShot { shot: f64, pool: usize },
    #[error("cap {cap} excludes every training sample")]
    CapExcludesAll { cap: f64 },
    #[error("mixed questions: expected {expected:?}, found {found:?}")]
    MixedQuestions { expected: Question, found: Question },
    #[error("one-step diagnosis of {question:?} needs a batch-direction model")]
    MissingDirectionLayer { question: Question },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {detail}")]
    MalformedRow { path: PathBuf, detail: String },
}

/// What varies between the training and test pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferMode {
    /// Clean-data training pool, label-noise test pool; few-shot splits.
    Dataset,
    /// Training pool capped by data fraction; deterministic, no subsampling.
    DataCap,
    /// Training pool capped by model width; deterministic, no subsampling.
    ParamCap,
}

impl TransferMode {
    pub fn id(self) -> &'static str {
        match self {
            TransferMode::Dataset => "dataset",
            TransferMode::DataCap => "data-cap",
            TransferMode::ParamCap => "param-cap",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "dataset" => Some(TransferMode::Dataset),
            "data-cap" => Some(TransferMode::DataCap),
            "param-cap" => Some(TransferMode::ParamCap),
            _ => None,
        }
    }
}

/// Diagnostic methods compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvalMethod {
    #[serde(rename = "mdtree")]
    MdTree,
    #[serde(rename = "mdtree-sim")]
    MdTreeSim,
    #[serde(rename = "cart-landscape")]
    CartLandscape,
    #[serde(rename = "cart-validation")]
    CartValidation,
    #[serde(rename = "cart-hyper")]
    CartHyper,
    #[serde(rename = "cart-combined")]
    CartCombined,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "optimal")]
    Optimal,
}

impl EvalMethod {
    pub const ALL: [EvalMethod; 8] = [
        EvalMethod::MdTree,
        EvalMethod::MdTreeSim,
        EvalMethod::CartLandscape,
        EvalMethod::CartValidation,
        EvalMethod::CartHyper,
        EvalMethod::CartCombined,
        EvalMethod::Random,
        EvalMethod::Optimal,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EvalMethod::MdTree => "mdtree",
            EvalMethod::MdTreeSim => "mdtree-sim",
            EvalMethod::CartLandscape => "cart-landscape",
            EvalMethod::CartValidation => "cart-validation",
            EvalMethod::CartHyper => "cart-hyper",
            EvalMethod::CartCombined => "cart-combined",
            EvalMethod::Random => "random",
            EvalMethod::Optimal => "optimal",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == id)
    }

    /// Fits the model-backed methods; the two baselines need none.
    pub fn fit(
        self,
        train: &[DiagnosisSample],
        fit_mode: FitMode,
    ) -> Result<Option<FittedModel>, DiagError> {
        Ok(match self {
            EvalMethod::MdTree => Some(FittedModel::MdTree(mdtree_fit(
                train,
                DeepMetric::Sharpness,
                fit_mode,
            )?)),
            EvalMethod::MdTreeSim => Some(FittedModel::MdTree(mdtree_fit(
                train,
                DeepMetric::Similarity,
                fit_mode,
            )?)),
            EvalMethod::CartLandscape => {
                Some(FittedModel::Cart(cart_fit(train, FeaturePolicy::LossLandscape)?))
            }
            EvalMethod::CartValidation => {
                Some(FittedModel::Cart(cart_fit(train, FeaturePolicy::Validation)?))
            }
            EvalMethod::CartHyper => {
                Some(FittedModel::Cart(cart_fit(train, FeaturePolicy::Hyperparameter)?))
            }
            EvalMethod::CartCombined => {
                Some(FittedModel::Cart(cart_fit(train, FeaturePolicy::Combined)?))
            }
            EvalMethod::Random | EvalMethod::Optimal => None,
        })
    }
}

/// One (method, split, seed) evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub question: Question,
    pub method: EvalMethod,
    pub mode: TransferMode,
    pub shot_or_cap: f64,
    pub seed: u64,
    pub accuracy: f64,
    /// Whether the few-shot draw needed the one-time single-class redraw.
    /// Carried in the API only; the CSV schema has no column for it.
    pub degenerate: bool,
}

fn pool_question(pool: &[DiagnosisSample], empty: EvalError) -> Result<Question, EvalError> {
    let first = pool.first().ok_or(empty)?.question;
    for s in pool {
        if s.question != first {
            return Err(EvalError::MixedQuestions { expected: first, found: s.question });
        }
    }
    Ok(first)
}

/// Cell key for structured few-shot draws. Samples are drawn one whole cell
/// at a time so every draw carries complete columns of the axis the
/// question diagnoses: for Q1 a (width, fraction) cell holds the full batch
/// column, for Q2 a fraction cell holds the full (width, batch) slice, for
/// Q2N a width cell holds the full (fraction, batch) slice.
fn cell_key(question: Question, c: &ConfigPoint) -> (u64, u64) {
    match question {
        Question::Q1 => (c.width_p as u64, c.data_fraction_n.to_bits()),
        Question::Q2 => (c.data_fraction_n.to_bits(), 0),
        Question::Q2N => (c.width_p as u64, 0),
    }
}

fn draw_split<'a>(
    pool: &'a [DiagnosisSample],
    question: Question,
    shot: usize,
    draw_seed: u64,
) -> Vec<&'a DiagnosisSample> {
    let mut cells: BTreeMap<(u64, u64), Vec<&DiagnosisSample>> = BTreeMap::new();
    for s in pool {
        cells.entry(cell_key(question, &s.config)).or_default().push(s);
    }
    for members in cells.values_mut() {
        members.sort_by_key(|s| {
            (s.config.width_p, s.config.batch_size_t, s.config.data_fraction_n.to_bits())
        });
    }
    let mut keys: Vec<_> = cells.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    keys.shuffle(&mut rng);
    let mut out = Vec::with_capacity(shot);
    for key in keys {
        if out.len() >= shot {
            break;
        }
        out.extend(cells[&key].iter().copied());
    }
    out.truncate(shot);
    out
}

/// Structured few-shot split: whole cells are appended in a seeded random
/// order until the shot count is reached, then truncated to it exactly. A
/// single-class draw is redrawn once from an independent stream and the
/// result marked degenerate either way.
pub fn dataset_split<'a>(
    pool: &'a [DiagnosisSample],
    question: Question,
    shot: usize,
    seed: u64,
) -> Result<(Vec<&'a DiagnosisSample>, bool), EvalError> {
    if pool.is_empty() {
        return Err(EvalError::EmptyTrainPool);
    }
    if shot == 0 || shot > pool.len() {
        return Err(EvalError::InvalidShot { shot: shot as f64, pool: pool.len() });
    }
    let first = draw_split(pool, question, shot, mix(&[seed, tag::SPLIT_DRAW]));
    if first.iter().any(|s| s.label != first[0].label) {
        return Ok((first, false));
    }
    let second = draw_split(pool, question, shot, mix(&[seed, tag::SPLIT_RESAMPLE]));
    Ok((second, true))
}

/// Axis a deterministic cap filters on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapAxis {
    Fraction,
    Width,
}

impl TransferMode {
    /// The cap modes and the axis they filter; dataset transfer has none.
    pub fn cap_axis(self) -> Option<CapAxis> {
        match self {
            TransferMode::Dataset => None,
            TransferMode::DataCap => Some(CapAxis::Fraction),
            TransferMode::ParamCap => Some(CapAxis::Width),
        }
    }
}

/// Deterministic scale-transfer split: keeps every training sample at or
/// below the cap, with no subsampling.
pub fn cap_split<'a>(
    pool: &'a [DiagnosisSample],
    axis: CapAxis,
    cap: f64,
) -> Result<Vec<&'a DiagnosisSample>, EvalError> {
    if pool.is_empty() {
        return Err(EvalError::EmptyTrainPool);
    }
    let kept: Vec<&DiagnosisSample> = pool
        .iter()
        .filter(|s| match axis {
            CapAxis::Fraction => s.config.data_fraction_n <= cap + 1e-12,
            CapAxis::Width => (s.config.width_p as f64) <= cap + 1e-12,
        })
        .collect();
    if kept.is_empty() {
        return Err(EvalError::CapExcludesAll { cap });
    }
    Ok(kept)
}

fn test_accuracy(
    method: EvalMethod,
    model: Option<&FittedModel>,
    test: &[DiagnosisSample],
    seed: u64,
) -> Result<f64, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tag::RANDOM_DIAG]));
    let mut correct = 0usize;
    for s in test {
        let predicted = match method {
            EvalMethod::Random => random_diagnosis(&mut rng, s.question),
            EvalMethod::Optimal => optimal_diagnosis(s),
            _ => {
                let model = model.expect("model-backed method carries a model");
                model.predict(&s.features)?.0
            }
        };
        if predicted == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Runs every (shot-or-cap, seed, method) combination: split, fit, score on
/// the full test pool. Splits and seeds run concurrently; rows come back
/// sorted by (shot_or_cap, seed, method) regardless of worker count.
pub fn transfer_eval(
    train_pool: &[DiagnosisSample],
    test_pool: &[DiagnosisSample],
    mode: TransferMode,
    xs: &[f64],
    methods: &[EvalMethod],
    fit_mode: FitMode,
    seeds: &[u64],
) -> Result<Vec<EvalRow>, EvalError> {
    let question = pool_question(train_pool, EvalError::EmptyTrainPool)?;
    let test_question = pool_question(test_pool, EvalError::EmptyTestPool)?;
    if test_question != question {
        return Err(EvalError::MixedQuestions { expected: question, found: test_question });
    }
    let tasks: Vec<(f64, u64)> =
        xs.iter().flat_map(|&x| seeds.iter().map(move |&s| (x, s))).collect();
    let nested: Vec<Vec<EvalRow>> = tasks
        .par_iter()
        .map(|&(x, seed)| -> Result<Vec<EvalRow>, EvalError> {
            let (train, degenerate) = match mode.cap_axis() {
                None => {
                    if x.fract() != 0.0 || x < 1.0 {
                        return Err(EvalError::InvalidShot { shot: x, pool: train_pool.len() });
                    }
                    dataset_split(train_pool, question, x as usize, seed)?
                }
                Some(axis) => (cap_split(train_pool, axis, x)?, false),
            };
            let train: Vec<DiagnosisSample> = train.into_iter().cloned().collect();
            methods
                .iter()
                .map(|&method| {
                    let model = method.fit(&train, fit_mode)?;
                    let accuracy = test_accuracy(method, model.as_ref(), test_pool, seed)?;
                    Ok(EvalRow {
                        question,
                        method,
                        mode,
                        shot_or_cap: x,
                        seed,
                        accuracy,
                        degenerate,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<EvalRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.shot_or_cap
            .total_cmp(&b.shot_or_cap)
            .then(a.seed.cmp(&b.seed))
            .then(a.method.cmp(&b.method))
    });
    Ok(rows)
}

/// How far a diagnosed configuration moves along its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// One grid index in the diagnosed direction.
    FixedOne,
    /// A uniform number of indices toward the bound.
    Random,
    /// To the argmin of validation error along the direction, current
    /// position included.
    Optimal,
}

impl StepPolicy {
    pub fn id(self) -> &'static str {
        match self {
            StepPolicy::FixedOne => "fixed_one",
            StepPolicy::Random => "random",
            StepPolicy::Optimal => "optimal",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "fixed_one" => Some(StepPolicy::FixedOne),
            "random" => Some(StepPolicy::Random),
            "optimal" => Some(StepPolicy::Optimal),
            _ => None,
        }
    }
}

/// Diagnosis provider for the one-step evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Diagnoser<'a> {
    Model(&'a FittedModel),
    Random,
    Optimal,
}

/// A one-step run's diagnosis setup. Composed questions (Q2, Q2N) that
/// diagnose the optimizer still need a batch direction: a model-backed
/// diagnoser reads it from `direction_layer` (a Q1 model), the random
/// baseline flips a coin, and the optimal baseline takes the sign of the
/// true Q1 gap (nonnegative means the batch is too large).
pub struct OneStepSetup<'a> {
    pub diagnoser: Diagnoser<'a>,
    pub direction_layer: Option<&'a FittedModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Batch,
    Width,
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Down,
    Up,
}

fn direction_for(
    table: &RecordTable,
    sample: &DiagnosisSample,
    label: Label,
    setup: &OneStepSetup,
    diag_rng: &mut ChaCha8Rng,
) -> Result<(Axis, Dir), EvalError> {
    Ok(match label {
        Label::TLarge => (Axis::Batch, Dir::Down),
        Label::TSmall => (Axis::Batch, Dir::Up),
        Label::ModelSize => (Axis::Width, Dir::Up),
        Label::DataAmount => (Axis::Fraction, Dir::Up),
        Label::Optimizer => {
            let dir = match setup.diagnoser {
                Diagnoser::Model(_) => {
                    let layer = setup.direction_layer.ok_or(EvalError::MissingDirectionLayer {
                        question: sample.question,
                    })?;
                    if layer.question() != Question::Q1 {
                        return Err(EvalError::MixedQuestions {
                            expected: Question::Q1,
                            found: layer.question(),
                        });
                    }
                    match layer.predict(&sample.features)?.0 {
                        Label::TLarge => Dir::Down,
                        _ => Dir::Up,
                    }
                }
                Diagnoser::Random => {
                    if diag_rng.random::<bool>() {
                        Dir::Down
                    } else {
                        Dir::Up
                    }
                }
                Diagnoser::Optimal => {
                    if gap(table, &sample.config, Question::Q1)? >= 0.0 {
                        Dir::Down
                    } else {
                        Dir::Up
                    }
                }
            };
            (Axis::Batch, dir)
        }
    })
}

/// Improvement of one config in validation-error units; `None` when the
/// diagnosed direction is already at its grid bound.
fn step_improvement(
    table: &RecordTable,
    config: &ConfigPoint,
    axis: Axis,
    dir: Dir,
    step: StepPolicy,
    step_rng: &mut ChaCha8Rng,
) -> Result<Option<f64>, EvalError> {
    let (w, b, f) = (config.width_p, config.batch_size_t, config.data_fraction_n);
    let unavailable =
        || EvalError::Label(LabelError::Unavailable { width: w, batch: b, fraction: f });
    let positions: Vec<(usize, usize, f64)> = match axis {
        Axis::Batch => table.batches().iter().map(|&t| (w, t, f)).collect(),
        Axis::Width => table.widths().iter().map(|&p| (p, b, f)).collect(),
        Axis::Fraction => table.fractions().iter().map(|&n| (w, b, n)).collect(),
    };
    let idx = positions
        .iter()
        .position(|&(pw, pb, pf)| pw == w && pb == b && pf == f)
        .expect("labeled config lies on the table grid");
    let val = |i: usize| positions.get(i).and_then(|&(pw, pb, pf)| table.val_error(pw, pb, pf));
    let current = val(idx).ok_or_else(unavailable)?;
    let ahead: Vec<usize> = match dir {
        Dir::Down => (0..idx).collect(),
        Dir::Up => (idx + 1..positions.len()).collect(),
    };
    if ahead.is_empty() {
        return Ok(None);
    }
    let target = match step {
        StepPolicy::FixedOne => match dir {
            Dir::Down => idx - 1,
            Dir::Up => idx + 1,
        },
        StepPolicy::Random => {
            let count = step_rng.random_range(1..=ahead.len());
            match dir {
                Dir::Down => idx - count,
                Dir::Up => idx + count,
            }
        }
        StepPolicy::Optimal => {
            let mut best = (idx, current);
            for &i in &ahead {
                let v = val(i).ok_or_else(unavailable)?;
                if v < best.1 {
                    best = (i, v);
                }
            }
            best.0
        }
    };
    let after = val(target).ok_or_else(unavailable)?;
    Ok(Some(current - after))
}

/// One one-step run over every labeled config of a zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepReport {
    pub question: Question,
    pub step: StepPolicy,
    pub seed: u64,
    /// Mean validation-accuracy improvement in percentage points, over all
    /// labeled configs; at-bound configs contribute zero.
    pub mean_improvement: f64,
    pub evaluated: usize,
    pub at_bound: usize,
}

/// Diagnoses every labeled config of the zoo, applies the step policy along
/// the indicated axis, and averages the validation improvement.
pub fn one_step_eval(
    records: &[ZooRecord],
    question: Question,
    setup: &OneStepSetup,
    step: StepPolicy,
    seed: u64,
) -> Result<OneStepReport, EvalError> {
    let table = RecordTable::new(records)?;
    let dataset = build_dataset(records, question)?;
    let mut diag_rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tag::RANDOM_DIAG]));
    let mut step_rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tag::RANDOM_STEP]));
    let mut total = 0.0;
    let mut at_bound = 0usize;
    for sample in &dataset.samples {
        let label = match setup.diagnoser {
            Diagnoser::Model(model) => {
                if model.question() != question {
                    return Err(EvalError::MixedQuestions {
                        expected: question,
                        found: model.question(),
                    });
                }
                model.predict(&sample.features)?.0
            }
            Diagnoser::Random => random_diagnosis(&mut diag_rng, question),
            Diagnoser::Optimal => optimal_diagnosis(sample),
        };
        let (axis, dir) = direction_for(&table, sample, label, setup, &mut diag_rng)?;
        match step_improvement(&table, &sample.config, axis, dir, step, &mut step_rng)? {
            Some(improvement) => total += improvement,
            None => at_bound += 1,
        }
    }
    let evaluated = dataset.samples.len();
    Ok(OneStepReport {
        question,
        step,
        seed,
        mean_improvement: 100.0 * total / evaluated as f64,
        evaluated,
        at_bound,
    })
}

/// Aggregated one-step line as written to the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepRow {
    pub question: Question,
    pub method: String,
    pub step: StepPolicy,
    pub mean_improvement: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One aggregated curve point of the plot-data report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub question: Question,
    pub method: EvalMethod,
    pub mode: TransferMode,
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

/// Collapses per-seed rows into (question, method, mode, x) curve points
/// with mean and population std over seeds, sorted by key.
pub fn aggregate_rows(rows: &[EvalRow]) -> Vec<PlotPoint> {
    let mut groups: BTreeMap<(&'static str, EvalMethod, TransferMode, u64), Vec<f64>> =
        BTreeMap::new();
    for row in rows {
        groups
            .entry((row.question.id(), row.method, row.mode, row.shot_or_cap.to_bits()))
            .or_default()
            .push(row.accuracy);
    }
    groups
        .into_iter()
        .map(|((question_id, method, mode, x_bits), accs)| {
            let (mean, std) = mean_std(&accs);
            PlotPoint {
                question: Question::from_id(question_id).expect("key built from a question id"),
                method,
                mode,
                x: f64::from_bits(x_bits),
                mean,
                std,
            }
        })
        .collect()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> EvalError + '_ {
    move |source| EvalError::Csv { path: path.to_path_buf(), source }
}

/// Writes per-seed transfer rows with the fixed column set
/// `question,method,mode,shot_or_cap,seed,accuracy`.
pub fn write_transfer_csv(path: &Path, rows: &[EvalRow]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    writer
        .write_record(["question", "method", "mode", "shot_or_cap", "seed", "accuracy"])
        .map_err(csv_err(path))?;
    for row in rows {
        writer
            .write_record([
                row.question.id(),
                row.method.id(),
                row.mode.id(),
                &format!("{}", row.shot_or_cap),
                &row.seed.to_string(),
                &format!("{}", row.accuracy),
            ])
            .map_err(csv_err(path))?;
    }
    writer.flush().map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

fn parse_field<T>(
    path: &Path,
    record: &csv::StringRecord,
    index: usize,
    parse: impl FnOnce(&str) -> Option<T>,
) -> Result<T, EvalError> {
    let raw = record.get(index).ok_or_else(|| EvalError::MalformedRow {
        path: path.to_path_buf(),
        detail: format!("missing column {index}"),
    })?;
    parse(raw).ok_or_else(|| EvalError::MalformedRow {
        path: path.to_path_buf(),
        detail: format!("bad value {raw:?} in column {index}"),
    })
}

/// Reads rows written by [`write_transfer_csv`]. The CSV carries no
/// degenerate column, so the flag comes back false.
pub fn read_transfer_csv(path: &Path) -> Result<Vec<EvalRow>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        rows.push(EvalRow {
            question: parse_field(path, &record, 0, Question::from_id)?,
            method: parse_field(path, &record, 1, EvalMethod::from_id)?,
            mode: parse_field(path, &record, 2, TransferMode::from_id)?,
            shot_or_cap: parse_field(path, &record, 3, |s| s.parse().ok())?,
            seed: parse_field(path, &record, 4, |s| s.parse().ok())?,
            accuracy: parse_field(path, &record, 5, |s| s.parse().ok())?,
            degenerate: false,
        });
    }
    Ok(rows)
}

/// Writes aggregated one-step lines with columns
/// `question,method,step_policy,mean_improvement,std`.
pub fn write_one_step_csv(path: &Path, rows: &[OneStepRow]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    writer
        .write_record(["question", "method", "step_policy", "mean_improvement", "std"])
        .map_err(csv_err(path))?;
    for row in rows {
        writer
            .write_record([
                row.question.id(),
                &row.method,
                row.step.id(),
                &format!("{}", row.mean_improvement),
                &format!("{}", row.std),
            ])
            .map_err(csv_err(path))?;
    }
    writer.flush().map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// Writes curve points for external plotting with columns
/// `question,method,mode,x,mean,std`.
pub fn write_plotdata_csv(path: &Path, points: &[PlotPoint]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    writer
        .write_record(["question", "method", "mode", "x", "mean", "std"])
        .map_err(csv_err(path))?;
    for p in points {
        writer
            .write_record([
                p.question.id(),
                p.method.id(),
                p.mode.id(),
                &format!("{}", p.x),
                &format!("{}", p.mean),
                &format!("{}", p.std),
            ])
            .map_err(csv_err(path))?;
    }
    writer.flush().map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}
