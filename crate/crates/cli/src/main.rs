use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use wmbind_core::harness::experiments::{self, ExperimentPlan};
use wmbind_core::harness::snapshot;
use wmbind_core::numerics::RngStream;
use wmbind_core::tasks::{self, TaskKind};
use wmbind_core::{validate, TrainConfig, ValidationReport, EXPERIMENT_NAMES};

#[derive(Parser)]
#[command(
    name = "wmbind",
    version,
    about = "Hybrid working-memory model: train on binding tasks, score and replay snapshots"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named experiment or a JSON training config
    Run(RunArgs),
    /// Score a stored snapshot on a fresh task sequence
    Validate(ValidateArgs),
    /// Replay a snapshot and dump its interface read/write trace
    Trace(TraceArgs),
    /// List experiment names with their default configurations
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment name (see `wmbind list`)
    #[arg(long, conflicts_with = "config")]
    experiment: Option<String>,
    /// JSON config file; missing fields fall back to first-order defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file's seed (default 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact root; runs land in <out>/<name>/<seed>/
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// snapshot.json produced by a run
    #[arg(long)]
    snapshot: PathBuf,
    /// Task to score (defaults to the task stored in the snapshot)
    #[arg(long)]
    task: Option<String>,
    /// Length of the scoring sequence
    #[arg(long)]
    steps: usize,
    /// Seed for the fresh task stream
    #[arg(long, default_value_t = 9)]
    seed: u64,
}

#[derive(Args)]
struct TraceArgs {
    /// snapshot.json produced by a run
    #[arg(long)]
    snapshot: PathBuf,
    /// Number of steps to replay
    #[arg(long)]
    steps: usize,
    /// Seed for the input stream
    #[arg(long, default_value_t = 9)]
    seed: u64,
    /// Where to write iv_trace.csv and the read/write heatmaps
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_task(name: &str) -> Result<TaskKind> {
    Ok(match name {
        "first_order" => TaskKind::FirstOrder,
        "generalized" => TaskKind::Generalized,
        "second_order" => TaskKind::SecondOrder,
        "third_order" => TaskKind::KthOrder { k: 3, width: 8 },
        "fourth_order" => TaskKind::KthOrder { k: 4, width: 8 },
        "cue_based" => TaskKind::CueBased {
            switch_period: None,
        },
        _ => bail!(
            "unknown task `{name}`; valid: first_order, generalized, second_order, \
             third_order, fourth_order, cue_based"
        ),
    })
}

fn print_report(report: &ValidationReport) {
    println!(
        "steps={} accuracy={:.4} recall_error={:.4} mse={:.6}",
        report.steps,
        report.overall.hamming_accuracy,
        report.overall.recall_error,
        report.overall.mse
    );
    for (cue, m) in &report.per_cue {
        println!(
            "cue {}: accuracy={:.4} recall_error={:.4}",
            cue.label(),
            m.hamming_accuracy,
            m.recall_error
        );
    }
    for (lag, acc) in &report.per_lag {
        println!("lag {lag}: accuracy={acc:.4}");
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    match (&args.experiment, &args.config) {
        (Some(name), None) => {
            let seed = args.seed.unwrap_or(1);
            experiments::run_experiment(name, seed, &args.out)?;
            Ok(())
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let mut cfg: TrainConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".to_string());
            let dir = args.out.join(stem).join(cfg.seed.to_string());
            experiments::run_with_config(&cfg, &dir)?;
            Ok(())
        }
        _ => bail!("pass exactly one of --experiment or --config"),
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let (mut model, _, cfg) = snapshot::load(&args.snapshot)
        .with_context(|| format!("loading snapshot {}", args.snapshot.display()))?;
    let task = match &args.task {
        Some(name) => parse_task(name)?,
        None => cfg.task,
    };
    let mut rng = RngStream::new(args.seed).fork("cli-validate");
    let report = validate(&mut model, task, args.steps, &mut rng, cfg.exclude_warmup)?;
    print_report(&report);
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    let (mut model, _, cfg) = snapshot::load(&args.snapshot)
        .with_context(|| format!("loading snapshot {}", args.snapshot.display()))?;
    let mut rng = RngStream::new(args.seed).fork("cli-trace");
    let samples = tasks::generate(cfg.task, &mut rng, args.steps)?;
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.to_f64()).collect();
    let (_, trace) = model.run_sequence(&inputs)?;

    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("iv_trace.csv");
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    experiments::emit_trace_heatmaps(&trace, args.steps, &args.out)?;
    println!(
        "steps={} mean_read_activation={:.6} trace={}",
        trace.len(),
        trace.mean_read_activation(),
        csv_path.display()
    );
    Ok(())
}

fn cmd_list() -> Result<()> {
    for name in EXPERIMENT_NAMES {
        match experiments::plan(name, 1)? {
            ExperimentPlan::Training(c) => {
                let task = serde_json::to_string(&c.task)?;
                let schedule: Vec<String> = c
                    .lr_schedule
                    .iter()
                    .map(|(e, lr)| format!("{lr}@{e}"))
                    .collect();
                println!(
                    "{name}: task={task} epochs={}x{} lr=[{}] n={} d={} c={} controller={}",
                    c.epochs,
                    c.steps_per_epoch,
                    schedule.join(", "),
                    c.brn_nodes,
                    c.brn_degree,
                    c.interface_dim,
                    c.controller_dim
                );
            }
            ExperimentPlan::Paired { default, .. } => {
                println!(
                    "{name}: generalized task trained twice — default layer-4 write wiring \
                     vs layer-3 ablation, {}x{} epochs each",
                    default.epochs, default.steps_per_epoch
                );
            }
            ExperimentPlan::Impulse(ic) => {
                println!(
                    "{name}: storage-net impulse probe, n={} d={} F={:.3}, {} steps, \
                     single-shot and repetitive",
                    ic.nodes, ic.degree, ic.forget_rate, ic.steps
                );
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Trace(args) => cmd_trace(args),
        Cmd::List => cmd_list(),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
