//! Command-line interface: `evaluate`, `simulate` and `validate`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use framebench::align::ThresholdUnit;
use framebench::bootstrap::{ResampleSpec, ResampleStrategy, TestMode};
use framebench::dataset::io::parse_manifest;
use framebench::dataset::{validate_dataset, FrameTask, Loaded};
use framebench::metrics::Metric;
use framebench::nested::UndefinedPolicy;
use framebench::run::{run_evaluate, RunConfig};
use framebench::simgen;
use framebench::Scalar;

#[derive(Parser)]
#[command(
    name = "framebench",
    about = "Consensus-free benchmarking of frame-level model predictions against an annotator panel",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a nested pairwise evaluation and write report files.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic panel dataset with known ground truth.
    Simulate(SimulateArgs),
    /// Check a dataset against its invariants and list violations.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// Task to evaluate: tissue, cell_class or cell_count.
    #[arg(long)]
    task: FrameTask,
    /// Comma-separated metrics (defaults: precision,recall,f1 or icc).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<Metric>,
    /// Cell matching distance threshold.
    #[arg(long, default_value_t = 7.5)]
    match_threshold: f64,
    /// Unit of the matching threshold: px or micron.
    #[arg(long, default_value = "micron")]
    match_threshold_unit: ThresholdUnit,
    /// Also report the background class for classification tasks.
    #[arg(long)]
    report_background: bool,
    /// Undefined-metric policy: drop, zero or one.
    #[arg(long, default_value = "drop")]
    undefined_policy: UndefinedPolicy,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    bootstrap_replicates: u32,
    /// Two-sided miscoverage level of the percentile interval.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Resampling strategy: hierarchical, frames or slides.
    #[arg(long, default_value = "hierarchical")]
    resample: ResampleStrategy,
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Margin on the average difference for hypothesis testing.
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Test mode: noninferiority, equivalence or superiority.
    #[arg(long = "test", default_value = "noninferiority")]
    test_mode: TestMode,
    /// Dump aggregated per-pair confusion matrices for audit.
    #[arg(long)]
    dump_confusions: bool,
    /// Worker threads (default: rayon's choice).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Panel config (JSON); missing fields take defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the generated dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Evaluate(args) => evaluate(args),
        Command::Simulate(args) => simulate(args),
        Command::Validate(args) => validate(args),
    }
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    let cfg = RunConfig {
        manifest: args.manifest,
        out_dir: args.out,
        task: args.task,
        metrics: args.metrics,
        match_threshold: args.match_threshold,
        threshold_unit: args.match_threshold_unit,
        report_background: args.report_background,
        undefined_policy: args.undefined_policy,
        resample: ResampleSpec {
            strategy: args.resample,
            replicates: args.bootstrap_replicates,
            alpha: args.alpha,
            master_seed: args.seed,
        },
        margin: args.margin,
        test_mode: args.test_mode,
        dump_confusions: args.dump_confusions,
        threads: args.threads,
    };
    let summary = run_evaluate::<Scalar>(&cfg).context("evaluation failed")?;
    println!(
        "evaluated {} frames; wrote reports to {}",
        summary.n_frames,
        summary.out_dir.display()
    );
    for w in &summary.warnings {
        eprintln!("{w}");
    }
    for r in &summary.results {
        let diff = r
            .nested
            .mean_difference
            .map(|d| format!("{d:+.4}"))
            .unwrap_or_else(|| "undefined".into());
        let ci = r
            .bootstrap
            .ci
            .map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]"))
            .unwrap_or_else(|| "[-, -]".into());
        let conclusion = r
            .test
            .map(|t| t.conclusion.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:<16} diff {diff} ci {ci} {conclusion}",
            r.metric.to_string(),
            r.class_name
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let cfg = simgen::load_config(&args.config).context("loading panel config")?;
    let generated = simgen::generate_panel::<Scalar>(&cfg, &args.out).context("generating panel")?;
    println!(
        "wrote {} ({} frames, {} annotators)",
        generated.manifest_path.display(),
        generated.loaded.dataset.n_frames(),
        generated.loaded.dataset.annotators().len()
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let Loaded { dataset, warnings } =
        parse_manifest::<Scalar>(&args.manifest).context("loading dataset")?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = validate_dataset(&dataset);
    if report.is_empty() {
        println!(
            "ok: {} frames, {} annotators, {} classes",
            dataset.n_frames(),
            dataset.annotators().len(),
            dataset.classes().n_total()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        println!("frame_id,annotator_id,rule");
        for v in &report.violations {
            println!("{v}");
        }
        eprintln!("{} violation(s) found", report.violations.len());
        Ok(ExitCode::from(2))
    }
}
