//! Training loops, learning-rate schedules, validation scoring, and run
//! records. Everything an experiment needs short of artifact files, which
//! live in [`experiments`].

pub mod experiments;
pub mod heatmap;
pub mod snapshot;

use crate::brn::BrnNet;
use crate::controller::{FfnConfig, FfnParams, IvWiring, RmspropState};
use crate::coupling::{InterfaceMap, IvTrace, WmModel};
use crate::error::{Error, Result};
use crate::numerics::{mse, threshold, Metric, RngStream};
use crate::tasks::{self, Cue, StepSample, TaskKind};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;

/// Storage-net wiring variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrnKind {
    Random,
    Lattice,
}

/// Full description of one training run. Serializes field-for-field as the
/// JSON config format; missing fields fall back to the first-order defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// (start_epoch, lr) phases; the first must start at epoch 0.
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
    pub brn_nodes: usize,
    pub brn_degree: usize,
    pub interface_dim: usize,
    pub forget_rate: f64,
    pub controller_dim: usize,
    pub iv_wiring: IvWiring,
    pub brn_kind: BrnKind,
    /// Validation-run length; validation happens after every `val_every`
    /// epochs (0 disables it).
    pub val_steps: usize,
    pub val_every: usize,
    /// Skip the first max_lag steps when scoring (targets there are padded
    /// with zero history).
    pub exclude_warmup: bool,
    /// Length of the fresh test sequence run after training.
    pub test_steps: usize,
    pub rmsprop_rho: f64,
    pub rmsprop_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: TaskKind::FirstOrder,
            epochs: 10,
            steps_per_epoch: 1000,
            lr_schedule: vec![(0, 1e-4), (5, 1e-5)],
            seed: 1,
            brn_nodes: 1000,
            brn_degree: 20,
            interface_dim: 350,
            forget_rate: crate::brn::DEFAULT_FORGET_RATE,
            controller_dim: 512,
            iv_wiring: IvWiring::Layer4,
            brn_kind: BrnKind::Random,
            val_steps: 100,
            val_every: 1,
            exclude_warmup: true,
            test_steps: 200,
            rmsprop_rho: 0.9,
            rmsprop_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.steps_per_epoch == 0 {
            return Err(Error::config("steps_per_epoch must be at least 1"));
        }
        if self.lr_schedule.is_empty() {
            return Err(Error::config("lr_schedule must have at least one phase"));
        }
        if self.lr_schedule[0].0 != 0 {
            return Err(Error::config("lr_schedule must begin at epoch 0"));
        }
        if self.lr_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::config(
                "lr_schedule start epochs must be strictly increasing",
            ));
        }
        if self.lr_schedule.iter().any(|&(_, lr)| lr <= 0.0 || !lr.is_finite()) {
            return Err(Error::config("learning rates must be positive and finite"));
        }
        if !(self.forget_rate > 0.0 && self.forget_rate.is_finite()) {
            return Err(Error::config("forget_rate must be positive and finite"));
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return Err(Error::config("rmsprop_rho must lie in (0, 1)"));
        }
        if !(self.rmsprop_epsilon > 0.0 && self.rmsprop_epsilon.is_finite()) {
            return Err(Error::config("rmsprop_epsilon must be positive"));
        }
        let warmup = if self.exclude_warmup {
            self.task.max_lag()
        } else {
            0
        };
        if self.val_every > 0 && self.val_steps <= warmup {
            return Err(Error::config(format!(
                "val_steps {} leaves nothing to score after the {warmup}-step warm-up",
                self.val_steps
            )));
        }
        if self.test_steps <= warmup {
            return Err(Error::config(format!(
                "test_steps {} leaves nothing to score after the {warmup}-step warm-up",
                self.test_steps
            )));
        }
        // surfaces the controller width constraint before any allocation
        self.ffn_config().validate()
    }

    pub fn ffn_config(&self) -> FfnConfig {
        FfnConfig {
            input_dim: self.task.input_dim(),
            output_dim: self.task.output_dim(),
            iv_dim: self.interface_dim,
            controller_dim: self.controller_dim,
            iv_wiring: self.iv_wiring,
        }
    }

    /// Learning rate in force at `epoch`: the last phase that has started.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .take_while(|&&(start, _)| start <= epoch)
            .last()
            .map(|&(_, lr)| lr)
            .unwrap_or(0.0)
    }
}

/// Build the model and optimizer a config describes. Substreams are labeled,
/// so the same seed always produces the same net, weights, and interface no
/// matter what else draws randomness.
pub fn build_model(cfg: &TrainConfig) -> Result<(WmModel, RmspropState)> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let params = FfnParams::init(cfg.ffn_config(), &mut root.fork("ffn"))?;
    let net = match cfg.brn_kind {
        BrnKind::Random => BrnNet::build_random(cfg.brn_nodes, cfg.brn_degree, &mut root.fork("brn"))?,
        BrnKind::Lattice => BrnNet::build_lattice(cfg.brn_nodes, cfg.brn_degree)?,
    }
    .with_forget_rate(cfg.forget_rate);
    let interface = InterfaceMap::select(cfg.brn_nodes, cfg.interface_dim, &mut root.fork("interface"))?;
    let opt = RmspropState::new(&params, cfg.rmsprop_rho, cfg.rmsprop_epsilon);
    Ok((WmModel::new(params, net, interface)?, opt))
}

/// Scores of one scored run (validation or test).
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    /// Steps actually scored (after any warm-up exclusion).
    pub steps: usize,
    pub overall: Metric,
    /// Cue task only: metrics split by the cue each step carried.
    pub per_cue: Vec<(Cue, Metric)>,
    /// Non-cue tasks: accuracy of each lag component of the target,
    /// in task lag order (lag 0 first).
    pub per_lag: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochValidation {
    pub epoch: usize,
    pub report: ValidationReport,
}

/// Post-training test run, kept whole for artifact emission.
#[derive(Clone, Debug)]
pub struct TestRun {
    pub samples: Vec<StepSample>,
    pub outputs: Vec<Vec<f64>>,
    pub trace: IvTrace,
    pub report: ValidationReport,
}

/// Everything a training run leaves behind (apart from the model itself).
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    /// One prediction loss per training step, recorded before the update.
    pub losses: Vec<f64>,
    /// Learning rate actually applied at each step.
    pub lrs: Vec<f64>,
    pub validations: Vec<EpochValidation>,
    pub test: Option<TestRun>,
    pub snapshot_path: Option<PathBuf>,
    pub wall_seconds: f64,
}

impl Default for ValidationReport {
    fn default() -> Self {
        ValidationReport {
            steps: 0,
            overall: Metric {
                mse: 0.0,
                hamming_accuracy: 1.0,
                recall_error: 0.0,
            },
            per_cue: Vec::new(),
            per_lag: Vec::new(),
        }
    }
}

fn metric_over(
    task: TaskKind,
    scored: &[(&StepSample, &[f64])],
) -> Result<Metric> {
    let mut loss_sum = 0.0;
    let mut bits_right = 0usize;
    let mut bits_total = 0usize;
    let mut recall_right = 0usize;
    let mut recall_total = 0usize;
    let recall = task.recall_range();
    for (sample, y) in scored {
        let target = sample.target.to_f64();
        loss_sum += mse(y, &target)?;
        let predicted = threshold(y, 0.5);
        let predicted = predicted.as_slice();
        let want = sample.target.as_slice();
        bits_total += want.len();
        bits_right += predicted
            .iter()
            .zip(want)
            .filter(|(p, t)| p == t)
            .count();
        recall_total += recall.len();
        recall_right += predicted[recall.clone()]
            .iter()
            .zip(&want[recall.clone()])
            .filter(|(p, t)| p == t)
            .count();
    }
    let n = scored.len();
    Ok(Metric {
        mse: loss_sum / n as f64,
        hamming_accuracy: bits_right as f64 / bits_total as f64,
        recall_error: 1.0 - recall_right as f64 / recall_total as f64,
    })
}

/// Pure scoring of a finished run: overall metrics, per-cue split for the
/// cue task, per-lag accuracies otherwise. Thresholding at 1/2 happens here;
/// upstream losses are computed on the raw outputs.
pub fn score_run(
    task: TaskKind,
    samples: &[StepSample],
    outputs: &[Vec<f64>],
    exclude_warmup: bool,
) -> Result<ValidationReport> {
    if samples.len() != outputs.len() {
        return Err(Error::DimMismatch {
            context: "scored outputs vs samples",
            expected: samples.len(),
            actual: outputs.len(),
        });
    }
    let skip = if exclude_warmup { task.max_lag() } else { 0 };
    let scored: Vec<(&StepSample, &[f64])> = samples
        .iter()
        .zip(outputs)
        .skip(skip)
        .map(|(s, y)| (s, y.as_slice()))
        .collect();
    if scored.is_empty() {
        return Err(Error::config("no steps left to score"));
    }
    for (sample, y) in &scored {
        if y.len() != sample.target.len() {
            return Err(Error::DimMismatch {
                context: "output width vs target width",
                expected: sample.target.len(),
                actual: y.len(),
            });
        }
    }

    let overall = metric_over(task, &scored)?;

    let mut per_cue = Vec::new();
    if matches!(task, TaskKind::CueBased { .. }) {
        for cue in [Cue::Zeros, Cue::Ones] {
            let subset: Vec<(&StepSample, &[f64])> = scored
                .iter()
                .filter(|(s, _)| task.cue_of(&s.input) == Some(cue))
                .copied()
                .collect();
            if !subset.is_empty() {
                per_cue.push((cue, metric_over(task, &subset)?));
            }
        }
    }

    let mut per_lag = Vec::new();
    if !matches!(task, TaskKind::CueBased { .. }) {
        let w = task.item_width();
        for (i, lag) in task.lags().into_iter().enumerate() {
            let lo = i * w;
            let mut right = 0usize;
            let mut total = 0usize;
            for (sample, y) in &scored {
                let predicted = threshold(&y[lo..lo + w], 0.5);
                let want = &sample.target.as_slice()[lo..lo + w];
                total += w;
                right += predicted
                    .as_slice()
                    .iter()
                    .zip(want)
                    .filter(|(p, t)| p == t)
                    .count();
            }
            per_lag.push((lag, right as f64 / total as f64));
        }
    }

    Ok(ValidationReport {
        steps: scored.len(),
        overall,
        per_cue,
        per_lag,
    })
}

/// Reset the model, run a fresh sequence from `rng`, and score it.
pub fn validate(
    model: &mut WmModel,
    task: TaskKind,
    n_steps: usize,
    rng: &mut RngStream,
    exclude_warmup: bool,
) -> Result<ValidationReport> {
    let ffn = model.params().config();
    if task.input_dim() != ffn.input_dim || task.output_dim() != ffn.output_dim {
        return Err(Error::DimMismatch {
            context: "task dims vs model dims",
            expected: ffn.input_dim,
            actual: task.input_dim(),
        });
    }
    let samples = tasks::generate(task, rng, n_steps)?;
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.to_f64()).collect();
    let (outputs, _) = model.run_sequence(&inputs)?;
    score_run(task, &samples, &outputs, exclude_warmup)
}

/// Train a model per the config: one fixed training sequence per run,
/// replayed every epoch from a reset state, one masked update per step.
pub fn train(cfg: &TrainConfig) -> Result<(WmModel, RmspropState, RunRecord)> {
    let started = Instant::now();
    let (mut model, mut opt) = build_model(cfg)?;
    let root = RngStream::new(cfg.seed);
    let samples = tasks::generate(cfg.task, &mut root.fork("train"), cfg.steps_per_epoch)?;
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.to_f64()).collect();
    let targets: Vec<Vec<f64>> = samples.iter().map(|s| s.target.to_f64()).collect();

    let mut record = RunRecord::default();
    record.losses.reserve(cfg.epochs * cfg.steps_per_epoch);
    record.lrs.reserve(cfg.epochs * cfg.steps_per_epoch);

    let val_root = root.fork("val");
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        model.reset();
        for (x, target) in inputs.iter().zip(&targets) {
            let out = model.step(x)?;
            record.losses.push(mse(&out.y, target)?);
            record.lrs.push(lr);
            model
                .params_mut()
                .fused_train_update(&out.cache, target, &mut opt, lr)?;
        }
        if cfg.val_every > 0 && (epoch + 1) % cfg.val_every == 0 {
            let mut vrng = val_root.fork(&epoch.to_string());
            let report = validate(&mut model, cfg.task, cfg.val_steps, &mut vrng, cfg.exclude_warmup)?;
            record.validations.push(EpochValidation { epoch, report });
        }
    }
    record.wall_seconds = started.elapsed().as_secs_f64();
    Ok((model, opt, record))
}
