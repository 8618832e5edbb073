//! Binding-task generators. Each task emits a stream of (input, target)
//! pairs where the target concatenates the current input with one or more
//! lagged copies of it; history before step 0 reads as zeros. Streams are a
//! pure function of the RNG stream handed in.

use crate::error::{Error, Result};
use crate::numerics::{BitVector, RngStream};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which cue a cue-task step carries. `Zeros` is the 00 cue asking for the
/// one-step-back item, `Ones` the 11 cue asking for the two-steps-back item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cue {
    Zeros,
    Ones,
}

impl Cue {
    pub fn lag(self) -> usize {
        match self {
            Cue::Zeros => 1,
            Cue::Ones => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cue::Zeros => "00",
            Cue::Ones => "11",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Cue::Zeros => 0,
            Cue::Ones => 1,
        }
    }
}

/// Task identity plus its parameters. Serialized form uses a `name` tag so
/// configs read as `{"name": "kth_order", "k": 3, "width": 8}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TaskKind {
    /// 6-bit items, target = (X_t, X_{t-1}).
    FirstOrder,
    /// 4-bit items, target = (X_t, X_{t-1}, ..., X_{t-7}).
    Generalized,
    /// 8-bit items, target = (X_t, X_{t-2}); the t-1 item is absent.
    SecondOrder,
    /// `width`-bit items, target = (X_t, X_{t-k}).
    KthOrder { k: usize, width: usize },
    /// Input (C_t, X_t) with C in {00, 11}; the cue picks the recalled lag
    /// (00 -> t-1, 11 -> t-2). Cues are i.i.d. unless `switch_period` is set,
    /// in which case they alternate in blocks starting with 00.
    CueBased {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        switch_period: Option<usize>,
    },
}

/// One time step of a task stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepSample {
    pub input: BitVector,
    pub target: BitVector,
}

impl TaskKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TaskKind::KthOrder { k, width } if k == 0 || width == 0 => Err(Error::config(
                format!("kth_order needs k >= 1 and width >= 1, got k={k} width={width}"),
            )),
            TaskKind::CueBased {
                switch_period: Some(0),
            } => Err(Error::config("cue switch_period must be >= 1")),
            _ => Ok(()),
        }
    }

    /// Width of the fresh item X_t drawn each step.
    pub fn item_width(&self) -> usize {
        match *self {
            TaskKind::FirstOrder => 6,
            TaskKind::Generalized => 4,
            TaskKind::SecondOrder => 8,
            TaskKind::KthOrder { width, .. } => width,
            TaskKind::CueBased { .. } => 6,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TaskKind::CueBased { .. } => 2 + self.item_width(),
            _ => self.item_width(),
        }
    }

    /// Lags bound into the target, in target order. Lag 0 is the copy
    /// component; the cue task binds lag 1 or 2 depending on the cue.
    pub fn lags(&self) -> Vec<usize> {
        match *self {
            TaskKind::FirstOrder => vec![0, 1],
            TaskKind::Generalized => (0..=7).collect(),
            TaskKind::SecondOrder => vec![0, 2],
            TaskKind::KthOrder { k, .. } => vec![0, k],
            TaskKind::CueBased { .. } => vec![0, 2],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            TaskKind::CueBased { .. } => 2 * self.item_width(),
            _ => self.item_width() * self.lags().len(),
        }
    }

    /// Deepest lag in any target; steps before this many have zero-padded
    /// history, which warm-up-excluding metrics skip.
    pub fn max_lag(&self) -> usize {
        self.lags().into_iter().max().unwrap_or(0)
    }

    /// Target bits that require memory (everything past the verbatim copy
    /// of X_t).
    pub fn recall_range(&self) -> std::ops::Range<usize> {
        self.item_width()..self.output_dim()
    }

    /// Recover the cue from an input vector; `None` for non-cue tasks.
    pub fn cue_of(&self, input: &BitVector) -> Option<Cue> {
        match self {
            TaskKind::CueBased { .. } => Some(if input.bit(0) == 1 {
                Cue::Ones
            } else {
                Cue::Zeros
            }),
            _ => None,
        }
    }
}

/// Generate `len` steps. Per step the draw order is fixed: the cue bit first
/// (i.i.d. cue task only), then the item bits most-significant-index last.
pub fn generate(kind: TaskKind, rng: &mut RngStream, len: usize) -> Result<Vec<StepSample>> {
    kind.validate()?;
    let width = kind.item_width();
    let mut history: Vec<BitVector> = Vec::with_capacity(len);
    let mut samples = Vec::with_capacity(len);

    let lagged = |history: &[BitVector], t: usize, lag: usize| -> BitVector {
        if lag > t {
            BitVector::zeros(width)
        } else {
            history[t - lag].clone()
        }
    };

    for t in 0..len {
        let cue = match kind {
            TaskKind::CueBased { switch_period } => Some(match switch_period {
                None => {
                    if rng.bit() == 1 {
                        Cue::Ones
                    } else {
                        Cue::Zeros
                    }
                }
                Some(period) => {
                    if (t / period) % 2 == 0 {
                        Cue::Zeros
                    } else {
                        Cue::Ones
                    }
                }
            }),
            _ => None,
        };
        let item = BitVector::new((0..width).map(|_| rng.bit()).collect());
        history.push(item.clone());

        let (input, target) = match cue {
            Some(cue) => {
                let c = BitVector::new(vec![cue.bit(), cue.bit()]);
                let recalled = lagged(&history, t, cue.lag());
                (
                    BitVector::concat(&[&c, &item]),
                    BitVector::concat(&[&item, &recalled]),
                )
            }
            None => {
                let parts: Vec<BitVector> = kind
                    .lags()
                    .into_iter()
                    .map(|lag| lagged(&history, t, lag))
                    .collect();
                let refs: Vec<&BitVector> = parts.iter().collect();
                (item, BitVector::concat(&refs))
            }
        };
        debug_assert_eq!(input.len(), kind.input_dim());
        debug_assert_eq!(target.len(), kind.output_dim());
        samples.push(StepSample { input, target });
    }
    Ok(samples)
}

/// Dump a stream as CSV (step, input bits, target bits), bits as 0/1 strings.
pub fn write_stream_csv(samples: &[StepSample], mut out: impl Write) -> Result<()> {
    writeln!(out, "step,input,target")?;
    for (t, s) in samples.iter().enumerate() {
        writeln!(out, "{t},{},{}", s.input, s.target)?;
    }
    Ok(())
}
