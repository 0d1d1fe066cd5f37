//! Command-line front end for the diagnosis pipeline: generate a model zoo,
//! label it, fit diagnostic trees, predict, evaluate transfer and one-step
//! changes, and reshape reports.
//!
//! Exit codes: 0 success, 2 usage, 3 malformed input file, 4 spec hash
//! mismatch, 1 anything else. Errors print as a single stderr line.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mdtree_core::diagnosis::{
    cart_fit, mdtree_fit, DeepMetric, DiagError, FeaturePolicy, FitMode, FittedModel,
};
use mdtree_core::eval::{
    aggregate_rows, one_step_eval, read_transfer_csv, transfer_eval, write_one_step_csv,
    write_plotdata_csv, write_transfer_csv, Diagnoser, EvalError, EvalMethod, OneStepRow,
    OneStepSetup, StepPolicy, TransferMode, PAPER_SEEDS,
};
use mdtree_core::labeling::{
    build_dataset, load_samples_jsonl, save_samples_jsonl, LabelError,
};
use mdtree_core::zoo::{load_jsonl, save_jsonl, sweep, ZooError};
use mdtree_core::{Label, Question, ZooSpec};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mdtree", version, about = "Model-zoo diagnosis pipeline")]
struct Cli {
    /// Worker threads; 1 guarantees bitwise-stable outputs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model zoo operations.
    #[command(subcommand)]
    Zoo(ZooCommand),
    /// Label a zoo with failure sources for one question.
    Label(LabelArgs),
    /// Fit a diagnostic model on labeled samples.
    Fit(FitArgs),
    /// Predict labels (and regimes) for labeled samples.
    Predict(PredictArgs),
    /// Evaluation harnesses.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Reshape an evaluation CSV.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ZooCommand {
    /// Train and measure every configuration of a zoo spec.
    Gen(ZooGenArgs),
}

#[derive(Args)]
struct ZooGenArgs {
    /// Zoo spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Output records file (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Task-level seed for data generation and metric streams.
    #[arg(long, default_value_t = 0)]
    task_seed: u64,
}

#[derive(Args)]
struct LabelArgs {
    /// Zoo records file (JSONL).
    #[arg(long)]
    zoo: PathBuf,
    /// Spec JSON to verify the records' spec hash against.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    question: QuestionArg,
    /// Output labeled samples file (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Labeled samples file (JSONL).
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_enum)]
    method: FitMethodArg,
    /// Feature set for the cart method; the fixed-hierarchy trees define
    /// their own features.
    #[arg(long, value_enum)]
    features: Option<FeaturesArg>,
    #[arg(long, value_enum, default_value_t = FitModeArg::Brent)]
    fit_mode: FitModeArg,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Fitted model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Labeled samples file (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output predictions file (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Fit on splits of a training pool, score on the full test pool.
    Transfer(TransferArgs),
    /// Diagnose every labeled config and step its hyperparameter.
    OneStep(OneStepArgs),
}

#[derive(Args)]
struct TransferArgs {
    /// Labeled training pool (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Labeled test pool (JSONL).
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Shot counts for dataset transfer, comma-separated.
    #[arg(long, value_delimiter = ',')]
    shots: Vec<u64>,
    /// Caps for scale transfer (widths or data fractions), comma-separated.
    #[arg(long, value_delimiter = ',')]
    caps: Vec<f64>,
    /// Methods to evaluate; defaults to all of them.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_enum, default_value_t = FitModeArg::Brent)]
    fit_mode: FitModeArg,
    /// Evaluation seeds; defaults to the pinned five.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output per-seed rows (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OneStepArgs {
    /// Zoo records of the zoo being stepped (JSONL).
    #[arg(long)]
    zoo: PathBuf,
    #[arg(long, value_enum)]
    question: QuestionArg,
    #[arg(long, value_enum)]
    diagnoser: DiagnoserArg,
    /// Fitted model file; required by the model diagnoser.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Q1 model choosing the batch direction when a composed question
    /// diagnoses the optimizer.
    #[arg(long)]
    direction_model: Option<PathBuf>,
    #[arg(long, value_enum)]
    step: StepArg,
    /// Evaluation seeds; defaults to the pinned five.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output aggregated row (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-seed transfer rows (CSV).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Plotdata)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuestionArg {
    Q1,
    Q2,
    #[value(name = "q2n")]
    Q2N,
}

impl From<QuestionArg> for Question {
    fn from(arg: QuestionArg) -> Question {
        match arg {
            QuestionArg::Q1 => Question::Q1,
            QuestionArg::Q2 => Question::Q2,
            QuestionArg::Q2N => Question::Q2N,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethodArg {
    Mdtree,
    #[value(name = "mdtree-sim")]
    MdtreeSim,
    Cart,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Landscape,
    Validation,
    Hyper,
    Combined,
}

impl From<FeaturesArg> for FeaturePolicy {
    fn from(arg: FeaturesArg) -> FeaturePolicy {
        match arg {
            FeaturesArg::Landscape => FeaturePolicy::LossLandscape,
            FeaturesArg::Validation => FeaturePolicy::Validation,
            FeaturesArg::Hyper => FeaturePolicy::Hyperparameter,
            FeaturesArg::Combined => FeaturePolicy::Combined,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FitModeArg {
    Brent,
    Exact,
}

impl From<FitModeArg> for FitMode {
    fn from(arg: FitModeArg) -> FitMode {
        match arg {
            FitModeArg::Brent => FitMode::Brent,
            FitModeArg::Exact => FitMode::ExactScan,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dataset,
    #[value(name = "data-cap")]
    DataCap,
    #[value(name = "param-cap")]
    ParamCap,
}

impl From<ModeArg> for TransferMode {
    fn from(arg: ModeArg) -> TransferMode {
        match arg {
            ModeArg::Dataset => TransferMode::Dataset,
            ModeArg::DataCap => TransferMode::DataCap,
            ModeArg::ParamCap => TransferMode::ParamCap,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagnoserArg {
    Model,
    Random,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    Fixed,
    Random,
    Optimal,
}

impl From<StepArg> for StepPolicy {
    fn from(arg: StepArg) -> StepPolicy {
        match arg {
            StepArg::Fixed => StepPolicy::FixedOne,
            StepArg::Random => StepPolicy::Random,
            StepArg::Optimal => StepPolicy::Optimal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Plotdata,
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore a second initialization (tests may share a process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 3 for malformed input files, 4 for spec hash mismatches, 1 otherwise.
/// Usage errors exit 2 inside clap before this is reached.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(zoo) = cause.downcast_ref::<ZooError>() {
            return match zoo {
                ZooError::SpecHashMismatch { .. } => 4,
                ZooError::Parse { .. } | ZooError::InvalidRecord { .. } => 3,
                _ => 1,
            };
        }
        if let Some(label) = cause.downcast_ref::<LabelError>() {
            return match label {
                LabelError::Parse { .. } => 3,
                _ => 1,
            };
        }
        if let Some(diag) = cause.downcast_ref::<DiagError>() {
            return match diag {
                DiagError::Parse { .. } => 3,
                _ => 1,
            };
        }
        if let Some(eval) = cause.downcast_ref::<EvalError>() {
            return match eval {
                EvalError::Csv { .. } | EvalError::MalformedRow { .. } => 3,
                EvalError::Label(LabelError::Parse { .. }) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Zoo(ZooCommand::Gen(args)) => zoo_gen(args),
        Command::Label(args) => label(args),
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Eval(EvalCommand::Transfer(args)) => eval_transfer(args),
        Command::Eval(EvalCommand::OneStep(args)) => eval_one_step(args),
        Command::Report(args) => report(args),
    }
}

fn read_spec(path: &Path) -> Result<ZooSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading spec {}", path.display()))?;
    let spec: ZooSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing spec {}", path.display()))?;
    spec.validate().with_context(|| format!("validating spec {}", path.display()))?;
    Ok(spec)
}

fn zoo_gen(args: ZooGenArgs) -> Result<()> {
    let spec = read_spec(&args.spec)?;
    let records = sweep(&spec, args.task_seed)?;
    save_jsonl(&records, &args.out)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn label(args: LabelArgs) -> Result<()> {
    let spec = args.spec.as_deref().map(read_spec).transpose()?;
    let records = load_jsonl(&args.zoo, spec.as_ref())?;
    let dataset = build_dataset(&records, args.question.into())?;
    save_samples_jsonl(&dataset.samples, &args.out)?;
    eprintln!(
        "labeled {} samples ({} excluded as optimal, {} unavailable) to {}",
        dataset.samples.len(),
        dataset.excluded_optimal,
        dataset.excluded_unavailable,
        args.out.display()
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let samples = load_samples_jsonl(&args.train)?;
    let model = match args.method {
        FitMethodArg::Mdtree | FitMethodArg::MdtreeSim => {
            if args.features.is_some() {
                bail!("--features only applies to --method cart");
            }
            let metric = match args.method {
                FitMethodArg::Mdtree => DeepMetric::Sharpness,
                _ => DeepMetric::Similarity,
            };
            FittedModel::MdTree(mdtree_fit(&samples, metric, args.fit_mode.into())?)
        }
        FitMethodArg::Cart => {
            if args.fit_mode != FitModeArg::Brent {
                bail!("--fit-mode only applies to the fixed-hierarchy methods");
            }
            let policy = args.features.unwrap_or(FeaturesArg::Landscape);
            FittedModel::Cart(cart_fit(&samples, policy.into())?)
        }
    };
    model.save_json(&args.out)?;
    eprintln!(
        "fitted {} on {} samples (training accuracy {:.4}) to {}",
        method_id(&model),
        samples.len(),
        model.train_accuracy(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine {
    width_p: usize,
    batch_size_t: usize,
    data_fraction_n: f64,
    label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    regime: Option<u8>,
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = FittedModel::load_json(&args.model)?;
    let samples = load_samples_jsonl(&args.input)?;
    let mut lines = String::new();
    for sample in &samples {
        let (label, regime) = model.predict(&sample.features)?;
        let line = PredictionLine {
            width_p: sample.config.width_p,
            batch_size_t: sample.config.batch_size_t,
            data_fraction_n: sample.config.data_fraction_n,
            label,
            regime,
        };
        lines.push_str(&serde_json::to_string(&line).expect("prediction serializes"));
        lines.push('\n');
    }
    std::fs::write(&args.out, lines)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("predicted {} samples to {}", samples.len(), args.out.display());
    Ok(())
}

fn eval_transfer(args: TransferArgs) -> Result<()> {
    let mode: TransferMode = args.mode.into();
    let xs: Vec<f64> = match mode {
        TransferMode::Dataset => {
            if !args.caps.is_empty() {
                bail!("dataset transfer takes --shots, not --caps");
            }
            if args.shots.is_empty() {
                bail!("dataset transfer needs --shots");
            }
            args.shots.iter().map(|&s| s as f64).collect()
        }
        TransferMode::DataCap | TransferMode::ParamCap => {
            if !args.shots.is_empty() {
                bail!("scale transfer takes --caps, not --shots");
            }
            if args.caps.is_empty() {
                bail!("scale transfer needs --caps");
            }
            args.caps.clone()
        }
    };
    let methods: Vec<EvalMethod> = if args.methods.is_empty() {
        EvalMethod::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|id| {
                EvalMethod::from_id(id)
                    .with_context(|| format!("unknown method {id:?}"))
            })
            .collect::<Result<_>>()?
    };
    let seeds = if args.seeds.is_empty() { PAPER_SEEDS.to_vec() } else { args.seeds.clone() };
    let train = load_samples_jsonl(&args.train)?;
    let test = load_samples_jsonl(&args.test)?;
    let rows = transfer_eval(&train, &test, mode, &xs, &methods, args.fit_mode.into(), &seeds)?;
    write_transfer_csv(&args.out, &rows)?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

/// Report id of a fitted model: the deep metric distinguishes the two
/// fixed-hierarchy variants, the feature policy the cart baselines.
fn method_id(model: &FittedModel) -> &'static str {
    match model {
        FittedModel::MdTree(m) => match m.deep_metric {
            DeepMetric::Sharpness => "mdtree",
            DeepMetric::Similarity => "mdtree-sim",
        },
        FittedModel::Cart(c) => match c.policy {
            FeaturePolicy::LossLandscape => "cart-landscape",
            FeaturePolicy::Validation => "cart-validation",
            FeaturePolicy::Hyperparameter => "cart-hyper",
            FeaturePolicy::Combined => "cart-combined",
        },
    }
}

fn eval_one_step(args: OneStepArgs) -> Result<()> {
    let records = load_jsonl(&args.zoo, None)?;
    let question: Question = args.question.into();
    let model = match (args.diagnoser, &args.model) {
        (DiagnoserArg::Model, Some(path)) => Some(FittedModel::load_json(path)?),
        (DiagnoserArg::Model, None) => bail!("--diagnoser model needs --model"),
        (_, Some(_)) => bail!("--model only applies to --diagnoser model"),
        (_, None) => None,
    };
    let direction = args.direction_model.as_deref().map(FittedModel::load_json).transpose()?;
    let (diagnoser, method) = match args.diagnoser {
        DiagnoserArg::Model => {
            let model = model.as_ref().expect("checked above");
            (Diagnoser::Model(model), method_id(model))
        }
        DiagnoserArg::Random => (Diagnoser::Random, "random"),
        DiagnoserArg::Optimal => (Diagnoser::Optimal, "optimal"),
    };
    let setup = OneStepSetup { diagnoser, direction_layer: direction.as_ref() };
    let seeds = if args.seeds.is_empty() { PAPER_SEEDS.to_vec() } else { args.seeds.clone() };
    let step: StepPolicy = args.step.into();
    let mut improvements = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let report = one_step_eval(&records, question, &setup, step, seed)?;
        improvements.push(report.mean_improvement);
    }
    let (mean, std) = mdtree_core::eval::mean_std(&improvements);
    let row = OneStepRow {
        question,
        method: method.to_string(),
        step,
        mean_improvement: mean,
        std,
    };
    write_one_step_csv(&args.out, &[row])?;
    eprintln!(
        "one-step {question:?} {method} {}: mean {mean:.4} std {std:.4} to {}",
        step.id(),
        args.out.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let rows = read_transfer_csv(&args.input)?;
    match args.format {
        FormatArg::Csv => write_transfer_csv(&args.out, &rows)?,
        FormatArg::Plotdata => write_plotdata_csv(&args.out, &aggregate_rows(&rows))?,
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
