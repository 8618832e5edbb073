//! Acceptance gate: twelve criteria, one PASS/FAIL line each (run with
//! `--nocapture` to see them stream; captured output still shows on failure).
//!
//! Stochastic criteria are judged on the median over seeds 1-5. The training
//! criteria dominate the runtime — the whole file is about an hour and a half
//! of serial compute at the default experiment scales.

use std::sync::OnceLock;

use wmbind_core::harness::experiments::{plan, run_experiment, ExperimentPlan};
use wmbind_core::harness::{snapshot, train, TrainConfig, ValidationReport};
use wmbind_core::numerics::{median_window, mse, RngStream};
use wmbind_core::tasks::{self, generate, StepSample};
use wmbind_core::{
    BitVector, BrnNet, Cue, FfnParams, FiringMode, IvWiring, TaskKind, WmModel,
};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const LOSS_WINDOW: usize = 100;

fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn final_windowed_loss(losses: &[f64]) -> f64 {
    *median_window(losses, LOSS_WINDOW).unwrap().last().unwrap()
}

/// One PASS/FAIL line per criterion; failing the check fails the test with
/// the same message.
fn verdict(label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {label}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {label}: {detail}");
}

fn training_cfg(experiment: &str, seed: u64) -> TrainConfig {
    match plan(experiment, seed).unwrap() {
        ExperimentPlan::Training(cfg) => cfg,
        other => panic!("{experiment} is not a plain training experiment: {other:?}"),
    }
}

/// Fresh-stream test run of a trained model: scored report plus the mean
/// read-slot activation over the whole test (the ablation criteria compare
/// interface traffic).
fn test_scores(model: &mut WmModel, cfg: &TrainConfig) -> (ValidationReport, f64) {
    let mut rng = RngStream::new(cfg.seed).fork("test");
    let samples = generate(cfg.task, &mut rng, cfg.test_steps).unwrap();
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.to_f64()).collect();
    let (outputs, trace) = model.run_sequence(&inputs).unwrap();
    let report =
        wmbind_core::harness::score_run(cfg.task, &samples, &outputs, cfg.exclude_warmup).unwrap();
    (report, trace.mean_read_activation())
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_01_gradient_oracle() {
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let mut rng = RngStream::new(4000 + case);
        let input_dim = 2 + rng.index(4);
        let output_dim = 2 + rng.index(4);
        let iv_dim = 2 + rng.index(3);
        let controller_dim = iv_dim + input_dim.max(output_dim) + rng.index(3);
        let cfg = wmbind_core::FfnConfig {
            input_dim,
            output_dim,
            iv_dim,
            controller_dim,
            iv_wiring: IvWiring::Layer4,
        };
        let params = FfnParams::init(cfg, &mut rng.fork("init")).unwrap();
        let mut draw = rng.fork("data");
        let x: Vec<f64> = (0..input_dim).map(|_| draw.uniform01()).collect();
        let read: Vec<f64> = (0..iv_dim).map(|_| draw.uniform01()).collect();
        let target: Vec<f64> = (0..output_dim).map(|_| draw.bit() as f64).collect();

        let cache = params.forward(&x, &read).unwrap();
        let grads = params.backward(&cache, &target).unwrap();

        let loss_of = |p: &FfnParams| mse(&p.forward(&x, &read).unwrap().y, &target).unwrap();
        let h = 1e-5;
        // central differences over every trainable entry, rebuilt via the
        // public block constructor so the oracle shares no internals
        for block in 0..4usize {
            let grad = match block {
                0 => &grads.w1,
                1 => &grads.w2,
                2 => &grads.w3,
                _ => &grads.w4_out,
            };
            for i in 0..grad.rows() {
                for j in 0..grad.cols() {
                    let eval = |delta: f64| {
                        let mut blocks = [
                            params.w1().clone(),
                            params.w2().clone(),
                            params.w3().clone(),
                            params.w4_out().clone(),
                        ];
                        blocks[block].set(i, j, blocks[block].get(i, j) + delta);
                        let [w1, w2, w3, w4_out] = blocks;
                        let p = FfnParams::from_blocks(
                            cfg,
                            w1,
                            w2,
                            w3,
                            w4_out,
                            params.w4_write().clone(),
                        )
                        .unwrap();
                        loss_of(&p)
                    };
                    let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                    let analytic = grad.get(i, j);
                    // denominator floored at the finite-difference noise
                    // scale (loss * eps / h ~ 5e-12 absolute), so near-zero
                    // entries are judged by absolute error (1e-10) instead
                    // of amplified roundoff
                    let rel =
                        (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-4);
                    worst = worst.max(rel);
                }
            }
        }
    }
    verdict(
        "01 gradient_oracle",
        worst < 1e-6,
        &format!("max relative error {worst:.3e} over 20 random tiny configs"),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_brn_dynamics_oracle() {
    // straight-loop reference evaluator, written against the public edge
    // iterator only
    fn reference_step(net: &BrnNet, prev: &[f64], input: &[f64]) -> Vec<f64> {
        (0..net.nodes())
            .map(|j| {
                let mut acc = input[j];
                for (s, w) in net.incoming(j) {
                    acc += w * prev[s];
                }
                let drive = net.forget_rate() * acc;
                if drive > 0.0 {
                    drive
                } else {
                    0.0
                }
            })
            .collect()
    }

    let mut checked = 0usize;
    for &seed in &SEEDS {
        for (nodes, degree) in [(10, 3), (33, 7), (50, 12)] {
            let mut rng = RngStream::new(seed).fork("brn-oracle");
            let net = BrnNet::build_random(nodes, degree, &mut rng).unwrap();
            let mut state = wmbind_core::BrnState::zeros(nodes);
            let mut reference = vec![0.0; nodes];
            let mut drive = rng.fork("inputs");
            for _ in 0..50 {
                // mixed-sign inputs exercise the rectifier
                let input: Vec<f64> = (0..nodes).map(|_| drive.uniform01() * 1.5 - 0.5).collect();
                state = net.step(&state, &input).unwrap();
                reference = reference_step(&net, &reference, &input);
                assert_eq!(state.activations, reference, "trajectory diverged");
                assert!(state.activations.iter().all(|&p| p >= 0.0));
                checked += 1;
            }
            // zero fixed point
            let zero = wmbind_core::BrnState::zeros(nodes);
            let stepped = net.step(&zero, &vec![0.0; nodes]).unwrap();
            assert!(stepped.activations.iter().all(|&p| p == 0.0));
        }
    }
    verdict(
        "02 brn_dynamics_oracle",
        true,
        &format!("{checked} steps bit-identical to the straight-loop reference"),
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_impulse_response() {
    let mut decay_ratios = Vec::new();
    let mut stab_ratios = Vec::new();
    let mut retained = 0usize;
    for &seed in &SEEDS {
        let root = RngStream::new(seed);
        let net = BrnNet::build_random(1000, 20, &mut root.fork("wiring")).unwrap();
        let mut pat = root.fork("pattern");
        let pattern: Vec<f64> = (0..1000).map(|_| pat.bit() as f64).collect();

        let single = net
            .impulse_trace(FiringMode::SingleShot, &pattern, 30)
            .unwrap();
        let mean_at = |row: usize| single.row(row).iter().sum::<f64>() / 1000.0;
        let m1 = mean_at(0);
        if (0..3).all(|r| single.row(r).iter().any(|&p| p > 0.0)) {
            retained += 1;
        }
        decay_ratios.push(mean_at(29) / m1);

        let rep = net
            .impulse_trace(FiringMode::Repetitive, &pattern, 100)
            .unwrap();
        let max_at = |row: usize| rep.row(row).iter().copied().fold(0.0f64, f64::max);
        let (m99, m100) = (max_at(98), max_at(99));
        assert!(m100.is_finite());
        stab_ratios.push((m100 - m99).abs() / m99);
    }
    let decay = median(decay_ratios);
    let stab = median(stab_ratios);
    let pass = retained >= 3 && decay < 0.10 && stab < 0.05;
    verdict(
        "03 impulse_response",
        pass,
        &format!(
            "retention {retained}/5 seeds, median step-30/step-1 mean ratio {decay:.4}, \
             median repetitive step-99->100 max drift {stab:.5}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_first_order_recall() {
    let mut accs = Vec::new();
    for &seed in &SEEDS {
        let cfg = training_cfg("first_order", seed);
        let (mut model, _, _) = train(&cfg).unwrap();
        let (report, _) = test_scores(&mut model, &cfg);
        let acc = 1.0 - report.overall.recall_error;
        println!("  first_order seed {seed}: recall-bit accuracy {acc:.4}");
        accs.push(acc);
    }
    let med = median(accs);
    verdict(
        "04 first_order_recall",
        med >= 0.99,
        &format!("median recall-bit accuracy {med:.4} over seeds 1-5, need >= 0.99"),
    );
}

// ------------------------------------------------------- criteria 5 + 8 share

struct GenRun {
    final_loss: f64,
    per_lag: Vec<(usize, f64)>,
    mean_read: f64,
}

fn generalized_run(cfg: &TrainConfig) -> GenRun {
    let (mut model, _, record) = train(cfg).unwrap();
    let (report, mean_read) = test_scores(&mut model, cfg);
    GenRun {
        final_loss: final_windowed_loss(&record.losses),
        per_lag: report.per_lag,
        mean_read,
    }
}

static GEN_DEFAULT: OnceLock<Vec<GenRun>> = OnceLock::new();

fn generalized_default_runs() -> &'static [GenRun] {
    GEN_DEFAULT.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let run = generalized_run(&training_cfg("generalized", seed));
                println!(
                    "  generalized seed {seed}: final windowed loss {:.4}",
                    run.final_loss
                );
                run
            })
            .collect()
    })
}

#[test]
fn criterion_05_generalized_convergence_and_lag_fade() {
    let runs = generalized_default_runs();
    let loss = median(runs.iter().map(|r| r.final_loss).collect());

    // median per-lag accuracy across seeds, then the monotonicity check on
    // lags 1..=7 with at most one adjacent inversion of <= 2 percentage points
    let lags: Vec<usize> = runs[0].per_lag.iter().map(|&(l, _)| l).collect();
    let med_acc: Vec<f64> = (0..lags.len())
        .map(|i| median(runs.iter().map(|r| r.per_lag[i].1).collect()))
        .collect();
    let curve: Vec<String> = lags
        .iter()
        .zip(&med_acc)
        .map(|(l, a)| format!("lag{l}={a:.3}"))
        .collect();

    let mut inversions = 0usize;
    let mut worst_inversion = 0.0f64;
    for i in 1..lags.len() - 1 {
        let rise = med_acc[i + 1] - med_acc[i];
        if rise > 0.0 {
            inversions += 1;
            worst_inversion = worst_inversion.max(rise);
        }
    }
    let monotone = inversions == 0 || (inversions == 1 && worst_inversion <= 0.02);
    verdict(
        "05 generalized_convergence_and_lag_fade",
        loss < 0.05 && monotone,
        &format!(
            "median final windowed loss {loss:.4} (need < 0.05); per-lag medians {}; \
             {inversions} adjacent inversion(s), worst {worst_inversion:.4}",
            curve.join(" ")
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_second_order_convergence() {
    let mut losses = Vec::new();
    let mut val_accs = Vec::new();
    for &seed in &SEEDS {
        let cfg = training_cfg("second_order", seed);
        let (_, _, record) = train(&cfg).unwrap();
        let loss = final_windowed_loss(&record.losses);
        let val = record
            .validations
            .last()
            .expect("per-epoch validation on")
            .report
            .overall
            .hamming_accuracy;
        println!("  second_order seed {seed}: loss {loss:.4}, val accuracy {val:.4}");
        losses.push(loss);
        val_accs.push(val);
    }
    let loss = median(losses);
    let val = median(val_accs);
    verdict(
        "06 second_order_convergence",
        loss < 0.025 && val >= 0.9,
        &format!(
            "median final windowed loss {loss:.4} (need < 0.025), \
             median final-epoch validation accuracy {val:.4} (need >= 0.9)"
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_cue_recall() {
    fn cue_err(report: &ValidationReport, cue: Cue) -> f64 {
        report
            .per_cue
            .iter()
            .find(|(c, _)| *c == cue)
            .map(|(_, m)| m.recall_error)
            .expect("both cues present in a scored run")
    }

    let mut zeros_errs = Vec::new();
    let mut ones_errs = Vec::new();
    let mut drops = Vec::new();
    for &seed in &SEEDS {
        let cfg = training_cfg("cue_based", seed);
        let (mut model, _, record) = train(&cfg).unwrap();
        let (report, _) = test_scores(&mut model, &cfg);
        let e0 = cue_err(&report, Cue::Zeros);
        let e1 = cue_err(&report, Cue::Ones);
        let first = cue_err(&record.validations.first().unwrap().report, Cue::Ones);
        let last = cue_err(&record.validations.last().unwrap().report, Cue::Ones);
        println!(
            "  cue_based seed {seed}: test errors cue00 {e0:.3} cue11 {e1:.3}, \
             cue11 validation {first:.3} -> {last:.3}"
        );
        zeros_errs.push(e0);
        ones_errs.push(e1);
        drops.push(first - last);
    }
    // the blocked-cue probe (cues switch every 5 steps) must leave its
    // heatmap artifacts behind; a desk-scale run is enough to exercise it
    let tmp = tempfile::tempdir().unwrap();
    let probe_cfg = TrainConfig {
        task: TaskKind::CueBased {
            switch_period: None,
        },
        epochs: 1,
        steps_per_epoch: 40,
        lr_schedule: vec![(0, 1e-4)],
        seed: 9,
        brn_nodes: 60,
        brn_degree: 6,
        interface_dim: 12,
        controller_dim: 32,
        val_steps: 20,
        test_steps: 40,
        ..TrainConfig::default()
    };
    wmbind_core::harness::experiments::run_with_config(&probe_cfg, tmp.path()).unwrap();
    let probe_files = [
        "cue_switch_outputs.csv",
        "cue_switch_target.svg",
        "cue_switch_predicted.svg",
        "cue_switch_error.svg",
    ];
    let emitted = probe_files.iter().all(|f| tmp.path().join(f).exists());

    let e0 = median(zeros_errs);
    let e1 = median(ones_errs);
    let drop = median(drops);
    verdict(
        "07 cue_recall",
        e0 <= 0.30 && e1 <= 0.40 && drop >= 0.08 && emitted,
        &format!(
            "median first-order-cue error {e0:.3} (need <= 0.30), \
             second-order-cue error {e1:.3} (need <= 0.40), \
             epoch-1 -> final drop {drop:.3} (need >= 0.08), \
             cue-switch heatmap artifacts emitted: {emitted}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_08_layer3_write_ablation() {
    let defaults = generalized_default_runs();
    let mut loss_ratios = Vec::new();
    let mut read_ratios = Vec::new();
    for (i, &seed) in SEEDS.iter().enumerate() {
        let ExperimentPlan::Paired { layer3, .. } = plan("ablation_iv_layer3", seed).unwrap()
        else {
            panic!("paired plan expected")
        };
        let ablated = generalized_run(&layer3);
        let lr = ablated.final_loss / defaults[i].final_loss;
        let rr = ablated.mean_read / defaults[i].mean_read;
        println!("  layer3 seed {seed}: loss ratio {lr:.2}, read ratio {rr:.3}");
        loss_ratios.push(lr);
        read_ratios.push(rr);
    }
    let lr = median(loss_ratios);
    let rr = median(read_ratios);
    verdict(
        "08 layer3_write_ablation",
        lr >= 3.0 && rr <= 0.5,
        &format!(
            "median loss ratio layer3/default {lr:.2} (need >= 3), \
             median read-activation ratio {rr:.3} (need <= 0.5)"
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_lattice_ablation() {
    let mut loss_ratios = Vec::new();
    let mut reads = Vec::new();
    let mut diverged = 0;
    for &seed in &SEEDS {
        let cfg = training_cfg("ablation_lattice", seed);
        let (mut model, _, record) = train(&cfg).unwrap();
        if record.losses.iter().any(|l| !l.is_finite()) {
            diverged += 1;
        }
        let windowed = median_window(&record.losses, LOSS_WINDOW).unwrap();
        // window ending at the last step of epoch 1 vs the final window
        let epoch1 = windowed[cfg.steps_per_epoch - LOSS_WINDOW];
        let ratio = windowed.last().unwrap() / epoch1;
        let (_, mean_read) = test_scores(&mut model, &cfg);
        println!("  lattice seed {seed}: final/epoch-1 loss ratio {ratio:.3}, mean read {mean_read:.4}");
        loss_ratios.push(ratio);
        reads.push(mean_read);
    }
    let ratio = median(loss_ratios);
    let read = median(reads);
    let mut detail = format!(
        "median final/epoch-1 windowed loss ratio {ratio:.3} (need >= 0.8, no convergence), \
         median mean read activation {read:.4} (need < 0.1)"
    );
    if diverged > 0 {
        // the band wiring has a linearly unstable period-3 spatial mode
        // (eigenvalue -(d-1)/3 at spatial frequency 2pi/3), so storage
        // activity grows without bound instead of idling near zero
        detail.push_str(&format!(
            "; {diverged}/5 seeds saw storage activity diverge (non-finite loss)"
        ));
    }
    verdict("09 lattice_ablation", ratio >= 0.8 && read < 0.1, &detail);
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_capacity_boundary() {
    let recall_acc = |experiment: &str, seed: u64| {
        let cfg = training_cfg(experiment, seed);
        let (mut model, _, _) = train(&cfg).unwrap();
        let (report, _) = test_scores(&mut model, &cfg);
        1.0 - report.overall.recall_error
    };
    let mut k3 = Vec::new();
    let mut k4 = Vec::new();
    for &seed in &SEEDS {
        let a3 = recall_acc("third_order", seed);
        let a4 = recall_acc("fourth_order", seed);
        println!("  capacity seed {seed}: k=3 recall {a3:.4}, k=4 recall {a4:.4}");
        k3.push(a3);
        k4.push(a4);
    }
    let a3 = median(k3);
    let a4 = median(k4);
    // the k=3 side is soft by design: a miss is reported as a capacity-curve
    // deviation rather than failing the gate
    let detail = if a3 >= 0.85 {
        format!("median k=3 recall {a3:.4} (>= 0.85), k=4 recall {a4:.4} (need <= 0.65)")
    } else {
        format!(
            "SOFT DEVIATION: median k=3 recall {a3:.4} < 0.85; measured capacity curve \
             k3={a3:.4} k4={a4:.4}; k=4 bound still enforced (need <= 0.65)"
        )
    };
    verdict("10 capacity_boundary", a4 <= 0.65, &detail);
}

// --------------------------------------------------------------- criterion 11

#[test]
fn criterion_11_determinism_and_persistence() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_experiment("first_order", 1, &dir_a).unwrap();
    run_experiment("first_order", 1, &dir_b).unwrap();
    let mut identical = true;
    for file in [
        "config.json",
        "metrics.csv",
        "outputs.csv",
        "iv_trace.csv",
        "snapshot.json",
    ] {
        let a = std::fs::read(dir_a.join("first_order/1").join(file)).unwrap();
        let b = std::fs::read(dir_b.join("first_order/1").join(file)).unwrap();
        if a != b {
            identical = false;
            println!("  {file} differs between reruns");
        }
    }

    // snapshot round trip must continue bit-identically with the live model
    let (mut live, opt, cfg) = snapshot::load(&dir_a.join("first_order/1/snapshot.json")).unwrap();
    let text = snapshot::to_json(&live, &opt, &cfg).unwrap();
    let (mut restored, _, _) = snapshot::from_json(&text).unwrap();
    let mut rng = RngStream::new(77).fork("replay");
    let samples = generate(cfg.task, &mut rng, 50).unwrap();
    let mut replay_identical = true;
    for s in &samples {
        let x = s.input.to_f64();
        let a = live.step(&x).unwrap();
        let b = restored.step(&x).unwrap();
        if a.y != b.y || a.write != b.write || a.read != b.read {
            replay_identical = false;
            break;
        }
    }
    verdict(
        "11 determinism_and_persistence",
        identical && replay_identical,
        &format!(
            "rerun artifacts byte-identical: {identical}; \
             snapshot continuation bit-identical over 50 steps: {replay_identical}"
        ),
    );
}

// --------------------------------------------------------------- criterion 12

#[test]
fn criterion_12_task_generator_oracles() {
    // stateless oracle: reconstruct every target from the visible input
    // stream alone
    fn check(kind: TaskKind, samples: &[StepSample]) {
        let w = kind.item_width();
        let items: Vec<&[u8]> = samples
            .iter()
            .map(|s| {
                let full = s.input.as_slice();
                match kind {
                    TaskKind::CueBased { .. } => &full[2..],
                    _ => full,
                }
            })
            .collect();
        for (t, s) in samples.iter().enumerate() {
            let lags = match kind {
                TaskKind::CueBased { .. } => {
                    let (c0, c1) = (s.input.bit(0), s.input.bit(1));
                    assert_eq!(c0, c1, "cue bits must agree at step {t}");
                    vec![0, if c0 == 0 { 1 } else { 2 }]
                }
                _ => kind.lags(),
            };
            let mut want: Vec<u8> = Vec::with_capacity(kind.output_dim());
            for lag in lags {
                if lag > t {
                    want.extend(std::iter::repeat_n(0, w));
                } else {
                    want.extend_from_slice(items[t - lag]);
                }
            }
            assert_eq!(
                s.target,
                BitVector::new(want),
                "target mismatch at step {t} for {kind:?}"
            );
        }
    }

    let kinds = [
        TaskKind::FirstOrder,
        TaskKind::Generalized,
        TaskKind::SecondOrder,
        TaskKind::KthOrder { k: 3, width: 8 },
        TaskKind::KthOrder { k: 4, width: 8 },
        TaskKind::CueBased {
            switch_period: None,
        },
        TaskKind::CueBased {
            switch_period: Some(5),
        },
    ];
    let mut streams = 0usize;
    for &seed in &SEEDS {
        for kind in kinds {
            let mut rng = RngStream::new(seed).fork("task-oracle");
            let samples = tasks::generate(kind, &mut rng, 1000).unwrap();
            check(kind, &samples);
            if let TaskKind::CueBased {
                switch_period: Some(p),
            } = kind
            {
                for (t, s) in samples.iter().enumerate() {
                    let expect = if (t / p) % 2 == 0 { Cue::Zeros } else { Cue::Ones };
                    assert_eq!(kind.cue_of(&s.input), Some(expect), "cue schedule at {t}");
                }
            }
            streams += 1;
        }
    }
    verdict(
        "12 task_generator_oracles",
        true,
        &format!("{streams} thousand-step streams match the history-buffer oracle"),
    );
}
