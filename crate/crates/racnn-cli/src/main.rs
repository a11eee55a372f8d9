//! Flag parsing and dispatch for the `racnn` binary. All real work lives
//! in the library so the suites can be driven from tests as well.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use racnn_cli::bench::{report_csv, run_bench, BenchConfig};
use racnn_cli::run::{render_train_text, run_eval, run_train, DataSource, EvalOpts, TrainOpts};
use racnn_cli::selfcheck::{run_selfcheck, SelfcheckConfig};
use racnn_cli::stats::{render_text as render_stats, run_stats_from_files};
use racnn_cli::{usage, write_text, CliError, CliResult, SyntheticKind};

#[derive(Parser)]
#[command(
    name = "racnn",
    version,
    about = "Benchmarks, alpha statistics, training drivers, and self-checks \
             for radius-adaptive convolution"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time standard 3x3, row-skipping, and dense adaptive variants of one layer
    Bench(BenchArgs),
    /// Per-layer alpha histograms of a saved model over an image set
    Stats(StatsArgs),
    /// Train the toy classifier, optionally both builds for a parity check
    Train(TrainArgs),
    /// Evaluate a saved model and print its accuracy
    Eval(EvalArgs),
    /// Run the oracle-equivalence suites and report per-suite status
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Input height in pixels
    #[arg(long, default_value_t = 64)]
    h: usize,
    /// Input width in pixels
    #[arg(long, default_value_t = 64)]
    c: usize,
    /// Input channels
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Output filters
    #[arg(long, default_value_t = 16)]
    f: usize,
    /// Fraction of pixels whose alpha clips to 0
    #[arg(long = "alpha-zero", default_value_t = 0.5)]
    alpha_zero: f64,
    /// Timed repetitions per variant (at least 3)
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Discarded warmup repetitions per variant (at least 3)
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Skip threshold for the sparse path
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run in f64 instead of f32
    #[arg(long)]
    fp64: bool,
    /// Start the selector from a bias of 1 (on) or 0 (off)
    #[arg(long = "alpha-bias", default_value = "on", value_parser = ["on", "off"])]
    alpha_bias: String,
    /// Also write the report as a one-row CSV file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Saved model to inspect
    #[arg(long)]
    model: PathBuf,
    /// IDX image file to run through the model
    #[arg(long, conflicts_with = "synthetic")]
    images: Option<PathBuf>,
    /// Generate images instead: 4class or linear
    #[arg(long)]
    synthetic: Option<String>,
    /// Synthetic sample count
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Synthetic image height
    #[arg(long, default_value_t = 16)]
    h: usize,
    /// Synthetic image width
    #[arg(long, default_value_t = 16)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Flag layers whose alpha=0 percentage falls below this
    #[arg(long = "revert-threshold", default_value_t = 10.0)]
    revert_threshold: f64,
    #[arg(long)]
    fp64: bool,
    /// Print the report as JSON instead of text
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to a file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset generator: 4class or linear
    #[arg(long, default_value = "4class")]
    synthetic: String,
    /// Total samples before the train/validation split
    #[arg(long, default_value_t = 320)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    h: usize,
    #[arg(long, default_value_t = 16)]
    c: usize,
    /// Fraction of samples in the training split
    #[arg(long = "train-frac", default_value_t = 0.75)]
    train_frac: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Train both builds from the same seed and report parity
    #[arg(long, conflicts_with = "arch")]
    pair: bool,
    /// Which single build to train: adaptive or standard
    #[arg(long, default_value = "adaptive", value_parser = ["adaptive", "standard"])]
    arch: String,
    #[arg(long = "alpha-bias", default_value = "on", value_parser = ["on", "off"])]
    alpha_bias: String,
    #[arg(long)]
    fp64: bool,
    /// Write the trained model here (the adaptive one in pair mode)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write the full history report as JSON to this file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the full JSON report instead of a summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// IDX image file (needs --labels)
    #[arg(long, requires = "labels", conflicts_with = "synthetic")]
    images: Option<PathBuf>,
    /// IDX label file
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Generate the dataset instead: 4class or linear
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 320)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    h: usize,
    #[arg(long, default_value_t = 16)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long)]
    fp64: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Run numeric suites in f64 and tighten the gradient tolerance
    #[arg(long)]
    fp64: bool,
    #[arg(long)]
    json: bool,
    /// Test hook: corrupt a hollow kernel center so the invariant suite fails
    #[arg(long = "corrupt-hollow", hide = true)]
    corrupt_hollow: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<ExitCode> {
    match cli.cmd {
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Stats(a) => cmd_stats(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Selfcheck(a) => cmd_selfcheck(a),
    }
}

fn cmd_bench(a: BenchArgs) -> CliResult<ExitCode> {
    let cfg = BenchConfig {
        h: a.h,
        c: a.c,
        d: a.d,
        f: a.f,
        alpha_zero: a.alpha_zero,
        reps: a.reps,
        warmup: a.warmup,
        threads: a.threads,
        tau: a.tau,
        seed: a.seed,
        fp64: a.fp64,
        alpha_bias: a.alpha_bias == "on",
    };
    let report = run_bench(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(path) = a.out {
        write_text(&path, &report_csv(&report))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(a: StatsArgs) -> CliResult<ExitCode> {
    if a.fp64 {
        stats_typed::<f64>(a)
    } else {
        stats_typed::<f32>(a)
    }
}

fn stats_typed<T: racnn::Scalar>(a: StatsArgs) -> CliResult<ExitCode> {
    let images: Vec<racnn::Tensor3<T>> = match (&a.images, &a.synthetic) {
        (Some(path), None) => racnn::io::load_idx_images(path)?,
        (None, Some(kind)) => {
            let kind = SyntheticKind::parse(kind)?;
            racnn_cli::make_synthetic::<T>(kind, a.n, a.h, a.c, a.seed)?.images
        }
        _ => return Err(usage("stats needs exactly one of --images or --synthetic")),
    };
    let report = run_stats_from_files::<T>(&a.model, &images, a.tau, a.revert_threshold)?;
    let json = serde_json::to_string_pretty(&report)?;
    if a.json {
        println!("{json}");
    } else {
        print!("{}", render_stats(&report));
    }
    if let Some(path) = a.out {
        write_text(&path, &json)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: TrainArgs) -> CliResult<ExitCode> {
    let opts = TrainOpts {
        kind: SyntheticKind::parse(&a.synthetic)?,
        n: a.n,
        h: a.h,
        c: a.c,
        train_frac: a.train_frac,
        epochs: a.epochs,
        batch: a.batch,
        lr: a.lr,
        seed: a.seed,
        tau: a.tau,
        alpha_bias: a.alpha_bias == "on",
        fp64: a.fp64,
        pair: a.pair,
        adaptive: a.arch == "adaptive",
        checkpoint: a.checkpoint,
    };
    let report = run_train(&opts)?;
    let json = serde_json::to_string_pretty(&report)?;
    if a.json {
        println!("{json}");
    } else {
        print!("{}", render_train_text(&report));
    }
    if let Some(path) = a.out {
        write_text(&path, &json)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(a: EvalArgs) -> CliResult<ExitCode> {
    let source = match (&a.images, &a.labels, &a.synthetic) {
        (Some(images), Some(labels), None) => {
            DataSource::Idx { images: images.clone(), labels: labels.clone() }
        }
        (None, None, Some(kind)) => DataSource::Synthetic {
            kind: SyntheticKind::parse(kind)?,
            n: a.n,
            h: a.h,
            c: a.c,
            seed: a.seed,
        },
        _ => return Err(usage("eval needs either --images with --labels, or --synthetic")),
    };
    let report = run_eval(&EvalOpts { model: a.model, source, tau: a.tau, fp64: a.fp64 })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "accuracy {:.4}  loss {:.4}  (n={}, tau={})",
            report.accuracy, report.loss, report.samples, report.tau
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_selfcheck(a: SelfcheckArgs) -> CliResult<ExitCode> {
    let results =
        run_selfcheck(&SelfcheckConfig { fp64: a.fp64, corrupt_hollow: a.corrupt_hollow });
    if a.json {
        println!("{}", serde_json::to_string_pretty(&results)?);
    } else {
        print!("{}", racnn_cli::selfcheck::render_text(&results));
    }
    if results.iter().all(|r| r.pass) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
