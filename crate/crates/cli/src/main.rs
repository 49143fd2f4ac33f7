//! `simdr`: bounds, audits and toy experiments for keypoint coordinate
//! representations. Every command is deterministic given its flags.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use simdr_core::encode::{DEFAULT_SA_SIGMA, DEFAULT_SMOOTHING};
use simdr_core::toy::format::{load_dataset, load_model, save_dataset, save_model};
use simdr_core::toy::{
    evaluate, gen_dataset, run_compare, run_sweep_k, train, EvalConfig, ExperimentConfig, Head, TargetParams, ToyModel,
    TrainConfig,
};
use simdr_core::{
    audit_roundtrip, heatmap_error_bound, representation_cost, simdr_error_bound, AuditRow, ImageDims, LossKind,
    SamplingRange, Scheme,
};

use output::{create_parent, emit, resolve_output, Format};

#[derive(Parser)]
#[command(
    name = "simdr",
    version,
    about = "Keypoint coordinate representations: bounds, audits, toy experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic quantization-error bounds and element counts of both representations.
    Bounds(BoundsArgs),
    /// Monte-Carlo encode/decode audit; exits nonzero if a bound is exceeded.
    Audit(AuditArgs),
    /// Generate a synthetic blob dataset.
    Gen(GenArgs),
    /// Train a toy model from zero on a dataset file.
    Train(TrainArgs),
    /// Evaluate a model file on a dataset file.
    Eval(EvalArgs),
    /// Train both heads on the same data and compare them.
    Compare(CompareArgs),
    /// Train the 1D head once per splitting factor.
    SweepK(SweepArgs),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    lambda: u32,
    /// Input size as HEIGHTxWIDTH.
    #[arg(long, default_value = "256x192")]
    dims: ImageDims,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Simdr,
    Heatmap,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Splitting factors (simdr).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    k: Vec<u32>,
    /// Downsampling ratios (heatmap).
    #[arg(long, value_delimiter = ',', default_value = "4")]
    lambda: Vec<u32>,
    /// One or more HEIGHTxWIDTH sizes.
    #[arg(long, value_delimiter = ',', default_value = "256x192")]
    dims: Vec<ImageDims>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sample the whole image instead of the clamp-free interior.
    #[arg(long)]
    edge_inclusive: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value = "16x16")]
    dims: ImageDims,
    #[arg(long, default_value_t = 1)]
    keypoints: usize,
    #[arg(long, default_value_t = 1.5)]
    blob_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Ce,
    Kl,
    Mse,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Ce => LossKind::CrossEntropy,
            LossArg::Kl => LossKind::KlDivergence,
            LossArg::Mse => LossKind::Mse,
        }
    }
}

#[derive(Args)]
struct TargetArgs {
    /// Label smoothing for cross-entropy targets.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    epsilon: f64,
    /// Sigma (bins) of space-aware 1D targets used with KL.
    #[arg(long, default_value_t = DEFAULT_SA_SIGMA)]
    sa_sigma: f64,
}

impl TargetArgs {
    fn params(&self) -> TargetParams {
        TargetParams {
            label_smoothing: self.epsilon,
            sa_sigma: self.sa_sigma,
        }
    }
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss curve CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Simdr)]
    head: SchemeArg,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    lambda: u32,
    /// Heatmap target sigma in cells.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Defaults to ce for simdr and mse for heatmap.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[command(flatten)]
    targets: TargetArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Plain argmax heatmap decoding, without the quarter-cell shift.
    #[arg(long)]
    no_shift: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value = "16x16")]
    dims: ImageDims,
    #[arg(long, default_value_t = 1)]
    keypoints: usize,
    #[arg(long, default_value_t = 5000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = 1.5)]
    blob_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Loss of the 1D head: ce (smoothed one-hot) or kl (space-aware).
    #[arg(long, value_enum, default_value_t = LossArg::Ce)]
    simdr_loss: LossArg,
    #[command(flatten)]
    targets: TargetArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

impl ToyArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            dims: self.dims,
            n_keypoints: self.keypoints,
            n_train: self.n_train,
            n_test: self.n_test,
            blob_sigma: self.blob_sigma,
            noise: self.noise,
            epochs: self.optim.epochs,
            learning_rate: self.optim.lr,
            batch_size: self.optim.batch_size,
            seed: self.optim.seed,
            simdr_loss: self.simdr_loss.into(),
            targets: self.targets.params(),
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    lambda: u32,
    /// Heatmap target sigma in cells.
    #[arg(long, default_value_t = 1.0)]
    heatmap_sigma: f64,
    #[command(flatten)]
    toy: ToyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    k: Vec<u32>,
    #[command(flatten)]
    toy: ToyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Value {
    Int(u64),
    Float(f64),
}

#[derive(Serialize)]
struct BoundsRow {
    metric: &'static str,
    height: u32,
    width: u32,
    k: u32,
    lambda: u32,
    simdr: Value,
    heatmap: Value,
}

#[derive(Serialize)]
struct CurveRow {
    epoch: usize,
    loss: f64,
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let cost = representation_cost(args.dims, args.k, args.lambda)?;
    let row = |metric, simdr, heatmap| BoundsRow {
        metric,
        height: args.dims.height(),
        width: args.dims.width(),
        k: args.k,
        lambda: args.lambda,
        simdr,
        heatmap,
    };
    let rows = [
        row(
            "error_bound",
            Value::Float(simdr_error_bound(args.k)),
            Value::Float(heatmap_error_bound(args.lambda)),
        ),
        row(
            "elements",
            Value::Int(cost.simdr_elements),
            Value::Int(cost.heatmap_elements),
        ),
    ];
    emit(&rows, args.output.format, args.output.out.as_deref())
}

/// Returns `false` when some configuration exceeded its bound.
fn cmd_audit(args: &AuditArgs) -> Result<bool> {
    let schemes: Vec<Scheme> = match args.scheme {
        SchemeArg::Simdr => args.k.iter().map(|&k| Scheme::SimDR { k }).collect(),
        SchemeArg::Heatmap => args.lambda.iter().map(|&lambda| Scheme::Heatmap { lambda }).collect(),
    };
    let range = if args.edge_inclusive {
        SamplingRange::EdgeInclusive
    } else {
        SamplingRange::Interior
    };
    let mut rows = Vec::new();
    let mut ok = true;
    for &dims in &args.dims {
        for &scheme in &schemes {
            let stats = audit_roundtrip(scheme, dims, args.n, args.seed, range)
                .with_context(|| format!("auditing {} {} at {dims}", scheme.name(), scheme.param()))?;
            if !stats.within_bound() {
                eprintln!(
                    "{} param {} at {dims}: max_err {} exceeds bound {} ({} samples above)",
                    scheme.name(),
                    scheme.param(),
                    stats.max_err,
                    stats.bound,
                    stats.above_bound
                );
                ok = false;
            }
            rows.push(AuditRow::new(scheme, dims, &stats));
        }
    }
    emit(&rows, args.output.format, args.output.out.as_deref())?;
    Ok(ok)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let data = gen_dataset(
        args.n,
        args.dims,
        args.keypoints,
        args.blob_sigma,
        args.noise,
        args.seed,
    )?;
    let path = resolve_output(&args.out);
    create_parent(&path)?;
    save_dataset(&data, &path).with_context(|| format!("writing {}", path.display()))
}

fn read_dataset_file(path: &Path) -> Result<simdr_core::toy::Dataset> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data = read_dataset_file(&args.data)?;
    let head = match args.head {
        SchemeArg::Simdr => Head::SimDR { k: args.k },
        SchemeArg::Heatmap => Head::Heatmap {
            lambda: args.lambda,
            sigma: args.sigma,
        },
    };
    let loss = match (args.loss, head) {
        (Some(l), _) => l.into(),
        (None, Head::SimDR { .. }) => LossKind::CrossEntropy,
        (None, Head::Heatmap { .. }) => LossKind::Mse,
    };
    let cfg = TrainConfig {
        learning_rate: args.optim.lr,
        epochs: args.optim.epochs,
        batch_size: args.optim.batch_size,
        seed: args.optim.seed,
        loss,
        targets: args.targets.params(),
    };
    let model = ToyModel::zeros(data.dims(), data.n_keypoints(), head)?;
    let outcome = train(&model, &data, &cfg)?;

    let path = resolve_output(&args.out);
    create_parent(&path)?;
    save_model(&outcome.model, &path).with_context(|| format!("writing {}", path.display()))?;
    if let Some(curve) = &args.curve_out {
        let rows: Vec<CurveRow> = outcome
            .loss_curve
            .iter()
            .enumerate()
            .map(|(i, &loss)| CurveRow { epoch: i + 1, loss })
            .collect();
        emit(&rows, Format::Csv, Some(curve))?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let data = read_dataset_file(&args.data)?;
    let model = load_model(&args.model).with_context(|| format!("reading model {}", args.model.display()))?;
    if model.dims() != data.dims() || model.n_keypoints() != data.n_keypoints() {
        bail!(
            "model expects {} images with {} keypoints, dataset has {} with {}",
            model.dims(),
            model.n_keypoints(),
            data.dims(),
            data.n_keypoints()
        );
    }
    let report = evaluate(
        &model,
        &data,
        &EvalConfig {
            heatmap_shift: !args.no_shift,
        },
    )?;
    emit(&[report], args.output.format, args.output.out.as_deref())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        k: args.k,
        lambda: args.lambda,
        heatmap_sigma: args.heatmap_sigma,
        ..args.toy.config()
    };
    let rows = run_compare(&cfg)?;
    emit(&rows, args.output.format, args.output.out.as_deref())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let rows = run_sweep_k(&args.toy.config(), &args.k)?;
    emit(&rows, args.output.format, args.output.out.as_deref())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a)?,
        Command::Audit(a) => return cmd_audit(a),
        Command::Gen(a) => cmd_gen(a)?,
        Command::Train(a) => cmd_train(a)?,
        Command::Eval(a) => cmd_eval(a)?,
        Command::Compare(a) => cmd_compare(a)?,
        Command::SweepK(a) => cmd_sweep(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
