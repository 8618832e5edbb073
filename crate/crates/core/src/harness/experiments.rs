//! Named experiment presets and artifact emission. Every run leaves a
//! self-describing directory: the resolved config, per-step metrics, the
//! post-training test run (outputs + interface trace), a restorable
//! snapshot, and SVG heatmaps of what the model did.

use crate::coupling::IvTrace;
use crate::error::{Error, Result};
use crate::harness::heatmap::{emit_heatmap, Palette};
use crate::harness::{self, snapshot, BrnKind, RunRecord, TestRun, TrainConfig};
use crate::brn::{BrnNet, FiringMode};
use crate::controller::IvWiring;
use crate::numerics::{threshold, Mat, RngStream};
use crate::tasks::{self, StepSample, TaskKind};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXPERIMENT_NAMES: [&str; 9] = [
    "first_order",
    "generalized",
    "second_order",
    "third_order",
    "fourth_order",
    "cue_based",
    "ablation_iv_layer3",
    "ablation_lattice",
    "impulse_response",
];

/// Storage-net-only probe: inject a random binary pattern and watch the
/// activity decay (single shot) or stabilize (repetitive).
#[derive(Clone, Debug, Serialize)]
pub struct ImpulseConfig {
    pub nodes: usize,
    pub degree: usize,
    pub forget_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub enum ExperimentPlan {
    Training(TrainConfig),
    /// Default wiring and the layer-3 write ablation, trained side by side.
    Paired {
        default: TrainConfig,
        layer3: TrainConfig,
    },
    Impulse(ImpulseConfig),
}

fn generalized_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        task: TaskKind::Generalized,
        epochs: 100,
        steps_per_epoch: 400,
        lr_schedule: vec![(0, 1e-4), (50, 1e-5)],
        seed,
        test_steps: 500,
        ..TrainConfig::default()
    }
}

fn second_order_budget(task: TaskKind, seed: u64) -> TrainConfig {
    TrainConfig {
        task,
        epochs: 20,
        steps_per_epoch: 2000,
        lr_schedule: vec![(0, 1e-4), (5, 1e-5), (15, 1e-6)],
        seed,
        test_steps: 500,
        ..TrainConfig::default()
    }
}

/// Resolve an experiment name to its preconfigured plan.
pub fn plan(name: &str, seed: u64) -> Result<ExperimentPlan> {
    let plan = match name {
        "first_order" => ExperimentPlan::Training(TrainConfig {
            seed,
            ..TrainConfig::default()
        }),
        "generalized" => ExperimentPlan::Training(generalized_cfg(seed)),
        "second_order" => {
            ExperimentPlan::Training(second_order_budget(TaskKind::SecondOrder, seed))
        }
        "third_order" => ExperimentPlan::Training(second_order_budget(
            TaskKind::KthOrder { k: 3, width: 8 },
            seed,
        )),
        "fourth_order" => ExperimentPlan::Training(second_order_budget(
            TaskKind::KthOrder { k: 4, width: 8 },
            seed,
        )),
        "cue_based" => ExperimentPlan::Training(TrainConfig {
            task: TaskKind::CueBased {
                switch_period: None,
            },
            epochs: 20,
            steps_per_epoch: 3000,
            lr_schedule: vec![(0, 1e-4), (5, 1e-5), (15, 1e-6)],
            seed,
            test_steps: 500,
            ..TrainConfig::default()
        }),
        "ablation_iv_layer3" => ExperimentPlan::Paired {
            default: generalized_cfg(seed),
            layer3: TrainConfig {
                iv_wiring: IvWiring::Layer3,
                ..generalized_cfg(seed)
            },
        },
        // degree 19 keeps the lattice balanced: each interior node sees
        // weights summing to zero only when degree-1 is a multiple of 3
        "ablation_lattice" => ExperimentPlan::Training(TrainConfig {
            brn_kind: BrnKind::Lattice,
            brn_degree: 19,
            epochs: 40,
            steps_per_epoch: 1000,
            lr_schedule: vec![(0, 1e-4), (25, 1e-5)],
            seed,
            test_steps: 500,
            ..second_order_budget(TaskKind::SecondOrder, seed)
        }),
        "impulse_response" => ExperimentPlan::Impulse(ImpulseConfig {
            nodes: 1000,
            degree: 20,
            forget_rate: crate::brn::DEFAULT_FORGET_RATE,
            steps: 60,
            seed,
        }),
        _ => {
            return Err(Error::UnknownExperiment {
                name: name.to_string(),
                valid: EXPERIMENT_NAMES.join(", "),
            })
        }
    };
    Ok(plan)
}

/// One finished training run and where its artifacts went.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub cfg: TrainConfig,
    pub record: RunRecord,
    pub dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub name: String,
    pub seed: u64,
    /// (label, run): a single "run" for plain experiments, "default" and
    /// "layer3" for the paired ablation, empty for the impulse probe.
    pub runs: Vec<(String, TrainedRun)>,
}

fn write_metrics_csv(cfg: &TrainConfig, record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,epoch,lr,train_mse,val_accuracy,val_recall_error,cue")?;
    let spe = cfg.steps_per_epoch;
    let mut vals = record.validations.iter().peekable();
    for epoch in 0..cfg.epochs {
        for s in 0..spe {
            let step = epoch * spe + s;
            writeln!(
                w,
                "{step},{epoch},{},{},,,",
                record.lrs[step], record.losses[step]
            )?;
        }
        while vals.peek().is_some_and(|v| v.epoch == epoch) {
            let v = vals.next().unwrap();
            let done = (epoch + 1) * spe;
            let lr = cfg.lr_at(epoch);
            let r = &v.report;
            writeln!(
                w,
                "{done},{epoch},{lr},,{},{},",
                r.overall.hamming_accuracy, r.overall.recall_error
            )?;
            for (cue, m) in &r.per_cue {
                writeln!(
                    w,
                    "{done},{epoch},{lr},,{},{},{}",
                    m.hamming_accuracy,
                    m.recall_error,
                    cue.label()
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_outputs_csv(samples: &[StepSample], outputs: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,input,target,predicted")?;
    for (t, (s, y)) in samples.iter().zip(outputs).enumerate() {
        writeln!(w, "{t},{},{},{}", s.input, s.target, threshold(y, 0.5))?;
    }
    w.flush()?;
    Ok(())
}

fn column_window<T, F>(steps: &[T], width: usize, take: usize, get: F) -> Mat
where
    F: Fn(&T, usize) -> f64,
{
    let lo = steps.len().saturating_sub(take);
    let window = &steps[lo..];
    Mat::from_fn(width, window.len(), |r, c| get(&window[c], r))
}

/// Target / prediction / agreement heatmaps over the last `take` steps,
/// column per step.
fn emit_run_heatmaps(
    prefix: &str,
    samples: &[StepSample],
    outputs: &[Vec<f64>],
    take: usize,
    dir: &Path,
) -> Result<()> {
    let width = samples.first().map_or(0, |s| s.target.len());
    let paired: Vec<(&StepSample, &Vec<f64>)> = samples.iter().zip(outputs).collect();
    let target = column_window(&paired, width, take, |(s, _), r| s.target.bit(r) as f64);
    let predicted = column_window(&paired, width, take, |(_, y), r| {
        if y[r] >= 0.5 {
            1.0
        } else {
            0.0
        }
    });
    let agree = column_window(&paired, width, take, |(s, y), r| {
        let p = if y[r] >= 0.5 { 1 } else { 0 };
        if p == s.target.bit(r) {
            1.0
        } else {
            0.0
        }
    });
    emit_heatmap(&target, Palette::Grayscale, &dir.join(format!("{prefix}_target.svg")))?;
    emit_heatmap(
        &predicted,
        Palette::Grayscale,
        &dir.join(format!("{prefix}_predicted.svg")),
    )?;
    emit_heatmap(&agree, Palette::RedGreen, &dir.join(format!("{prefix}_error.svg")))?;
    Ok(())
}

/// Read/write heatmaps over the last `take` steps of an interface trace.
pub fn emit_trace_heatmaps(trace: &IvTrace, take: usize, dir: &Path) -> Result<()> {
    let dim = trace.reads.first().map_or(0, |r| r.len());
    let reads = column_window(&trace.reads, dim, take, |row, r| row[r]);
    let writes = column_window(&trace.writes, dim, take, |row, r| row[r]);
    emit_heatmap(&reads, Palette::Grayscale, &dir.join("iv_reads.svg"))?;
    emit_heatmap(&writes, Palette::Grayscale, &dir.join("iv_writes.svg"))?;
    Ok(())
}

const HEATMAP_STEPS: usize = 50;

/// Train per the config and leave the full artifact set in `dir`.
pub fn run_with_config(cfg: &TrainConfig, dir: &Path) -> Result<TrainedRun> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut pretty = serde_json::to_string_pretty(cfg)?;
    pretty.push('\n');
    fs::write(dir.join("config.json"), pretty)?;

    let (mut model, opt, mut record) = harness::train(cfg)?;

    // fresh test episode on an independent substream
    let root = RngStream::new(cfg.seed);
    let samples = tasks::generate(cfg.task, &mut root.fork("test"), cfg.test_steps)?;
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.to_f64()).collect();
    let (outputs, trace) = model.run_sequence(&inputs)?;
    let report = harness::score_run(cfg.task, &samples, &outputs, cfg.exclude_warmup)?;

    write_metrics_csv(cfg, &record, &dir.join("metrics.csv"))?;
    write_outputs_csv(&samples, &outputs, &dir.join("outputs.csv"))?;
    let mut trace_file = BufWriter::new(File::create(dir.join("iv_trace.csv"))?);
    trace.write_csv(&mut trace_file)?;
    trace_file.flush()?;
    drop(trace_file);
    emit_run_heatmaps("outputs", &samples, &outputs, HEATMAP_STEPS, dir)?;
    emit_trace_heatmaps(&trace, HEATMAP_STEPS, dir)?;

    // the cue task additionally gets the blocked-cue probe: cues switch
    // every five steps instead of arriving i.i.d.
    if let TaskKind::CueBased { .. } = cfg.task {
        let blocked = TaskKind::CueBased {
            switch_period: Some(5),
        };
        let probe = tasks::generate(blocked, &mut root.fork("cue_test"), HEATMAP_STEPS)?;
        let probe_inputs: Vec<Vec<f64>> = probe.iter().map(|s| s.input.to_f64()).collect();
        let (probe_outputs, _) = model.run_sequence(&probe_inputs)?;
        write_outputs_csv(&probe, &probe_outputs, &dir.join("cue_switch_outputs.csv"))?;
        emit_run_heatmaps("cue_switch", &probe, &probe_outputs, HEATMAP_STEPS, dir)?;
    }

    let snapshot_path = dir.join("snapshot.json");
    snapshot::save(&snapshot_path, &model, &opt, cfg)?;
    record.snapshot_path = Some(snapshot_path);
    record.test = Some(TestRun {
        samples,
        outputs,
        trace,
        report,
    });

    let test = record.test.as_ref().unwrap();
    println!(
        "run dir={} steps={} test_accuracy={:.4} test_recall_error={:.4} wall={:.1}s",
        dir.display(),
        record.losses.len(),
        test.report.overall.hamming_accuracy,
        test.report.overall.recall_error,
        record.wall_seconds
    );

    Ok(TrainedRun {
        cfg: cfg.clone(),
        record,
        dir: dir.to_path_buf(),
    })
}

fn impulse_stats_csv(trace: &Mat, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,mean,max,active")?;
    for r in 0..trace.rows() {
        let row = trace.row(r);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let max = row.iter().cloned().fold(0.0f64, f64::max);
        let active = row.iter().filter(|&&v| v > 0.0).count();
        writeln!(w, "{},{mean},{max},{active}", r + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn run_impulse(ic: &ImpulseConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut pretty = serde_json::to_string_pretty(ic)?;
    pretty.push('\n');
    fs::write(dir.join("config.json"), pretty)?;

    let root = RngStream::new(ic.seed);
    let net = BrnNet::build_random(ic.nodes, ic.degree, &mut root.fork("wiring"))?
        .with_forget_rate(ic.forget_rate);
    let mut prng = root.fork("pattern");
    let pattern: Vec<f64> = (0..ic.nodes).map(|_| prng.bit() as f64).collect();

    for (mode, label) in [
        (FiringMode::SingleShot, "single_shot"),
        (FiringMode::Repetitive, "repetitive"),
    ] {
        let trace = net.impulse_trace(mode, &pattern, ic.steps)?;
        impulse_stats_csv(&trace, &dir.join(format!("{label}_stats.csv")))?;
        // row per step in the trace; heatmaps want node rows and step columns
        let shown = 100.min(ic.nodes);
        let view = Mat::from_fn(shown, trace.rows(), |node, step| trace.get(step, node));
        emit_heatmap(&view, Palette::Grayscale, &dir.join(format!("{label}.svg")))?;
        let first = trace.row(0).iter().sum::<f64>() / ic.nodes as f64;
        let last = trace.row(trace.rows() - 1).iter().sum::<f64>() / ic.nodes as f64;
        println!(
            "impulse {label}: mean activity step1={first:.4} step{}={last:.4}",
            trace.rows()
        );
    }
    Ok(())
}

/// Run a named experiment for one seed, artifacts under
/// `out_root/<name>/<seed>/`.
pub fn run_experiment(name: &str, seed: u64, out_root: &Path) -> Result<ExperimentOutcome> {
    let base = out_root.join(name).join(seed.to_string());
    let mut outcome = ExperimentOutcome {
        name: name.to_string(),
        seed,
        runs: Vec::new(),
    };
    match plan(name, seed)? {
        ExperimentPlan::Training(cfg) => {
            let run = run_with_config(&cfg, &base)?;
            outcome.runs.push(("run".to_string(), run));
        }
        ExperimentPlan::Paired { default, layer3 } => {
            let d = run_with_config(&default, &base.join("default"))?;
            let l = run_with_config(&layer3, &base.join("layer3"))?;
            outcome.runs.push(("default".to_string(), d));
            outcome.runs.push(("layer3".to_string(), l));
        }
        ExperimentPlan::Impulse(ic) => run_impulse(&ic, &base)?,
    }
    Ok(outcome)
}
