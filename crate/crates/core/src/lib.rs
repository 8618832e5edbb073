//! Hybrid working-memory model for online memory-binding tasks.
//!
//! A trainable feed-forward controller is coupled, through a read/write
//! interface vector, to a fixed balanced random network that serves as
//! learning-free temporary storage. The crate provides the network and
//! controller kernels, the coupled model, the task generators, and a
//! training/experiment harness with deterministic, seed-addressed artifacts.

pub mod brn;
pub mod controller;
pub mod coupling;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod tasks;

pub use brn::{BrnNet, BrnState, FiringMode, DEFAULT_FORGET_RATE};
pub use controller::{FfnConfig, FfnGrads, FfnParams, ForwardCache, IvWiring, RmspropState};
pub use coupling::{InterfaceMap, IvTrace, WmModel, WmStepOutput};
pub use harness::experiments::{
    plan, run_experiment, run_with_config, ExperimentOutcome, ExperimentPlan, ImpulseConfig,
    TrainedRun, EXPERIMENT_NAMES,
};
pub use harness::{
    build_model, score_run, train, validate, BrnKind, EpochValidation, RunRecord, TestRun,
    TrainConfig, ValidationReport,
};
pub use tasks::{Cue, StepSample, TaskKind};
pub use error::{Error, Result};
pub use numerics::{
    fingerprint_f64, hamming_accuracy, median_window, mse, sigmoid, threshold, BitVector, Mat,
    Metric, RngStream,
};
