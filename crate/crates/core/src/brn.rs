//! Balanced random network: fixed sparse recurrent net used as temporary
//! storage. Weights are set once at construction and never learn.
//!
//! Update rule per node j:
//!   P_j(t) = max(F * (I_j(t) + sum_i W_ji * P_i(t-1)), 0)
//! where F is the forget rate, I the external input, and the sum runs over
//! the incoming edges of j. External input enters once per node, outside the
//! recurrent sum.

use crate::error::{Error, Result};
use crate::numerics::{Mat, RngStream};
use serde::{Deserialize, Serialize};

pub const DEFAULT_FORGET_RATE: f64 = 1.0 / 3.0;

// Random construction: +1/2 with probability 2/3, otherwise -1. The positive
// mass exactly cancels the negative mass in expectation: (2/3)(1/2) = (1/3)(1).
const EXCITATORY_WEIGHT: f64 = 0.5;
const INHIBITORY_WEIGHT: f64 = -1.0;
const EXCITATORY_PROB: f64 = 2.0 / 3.0;

/// Sparse recurrent network in CSR-by-target layout: the incoming edges of
/// node j live at `sources[offsets[j]..offsets[j+1]]` (parallel `weights`).
#[derive(Clone, Debug, PartialEq)]
pub struct BrnNet {
    nodes: usize,
    degree: usize,
    forget_rate: f64,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    weights: Vec<f64>,
}

/// Flat serializable form of the wiring; `BrnNet::from_parts` revalidates
/// the structure so persisted documents cannot smuggle in broken nets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrnParts {
    pub nodes: usize,
    pub degree: usize,
    pub forget_rate: f64,
    pub offsets: Vec<usize>,
    pub sources: Vec<u32>,
    pub weights: Vec<f64>,
}

/// Activation vector; entries are non-negative after every update.
#[derive(Clone, Debug, PartialEq)]
pub struct BrnState {
    pub activations: Vec<f64>,
}

impl BrnState {
    pub fn zeros(nodes: usize) -> Self {
        BrnState {
            activations: vec![0.0; nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    pub fn mean_activation(&self) -> f64 {
        if self.activations.is_empty() {
            return 0.0;
        }
        self.activations.iter().sum::<f64>() / self.activations.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiringMode {
    /// Inject the pattern at the first step only.
    SingleShot,
    /// Inject the pattern at every step.
    Repetitive,
}

impl BrnNet {
    /// Random wiring: every node receives exactly `degree` incoming edges from
    /// distinct non-self sources; weights are +1/2 with probability 2/3 and -1
    /// otherwise. Forget rate defaults to 1/3.
    pub fn build_random(nodes: usize, degree: usize, rng: &mut RngStream) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::config("random net needs at least 2 nodes"));
        }
        if degree == 0 || degree > nodes - 1 {
            return Err(Error::config(format!(
                "degree {degree} out of range 1..={}",
                nodes - 1
            )));
        }
        let mut offsets = Vec::with_capacity(nodes + 1);
        let mut sources = Vec::with_capacity(nodes * degree);
        let mut weights = Vec::with_capacity(nodes * degree);
        offsets.push(0);
        for j in 0..nodes {
            // sample from 0..nodes-1 and shift indices >= j past the self slot
            for pick in rng.sample_distinct(nodes - 1, degree) {
                let src = if pick >= j { pick + 1 } else { pick };
                sources.push(src as u32);
                weights.push(if rng.chance(EXCITATORY_PROB) {
                    EXCITATORY_WEIGHT
                } else {
                    INHIBITORY_WEIGHT
                });
            }
            offsets.push(sources.len());
        }
        Ok(BrnNet {
            nodes,
            degree,
            forget_rate: DEFAULT_FORGET_RATE,
            offsets,
            sources,
            weights,
        })
    }

    /// Deterministic lattice wiring: edge i -> j exactly when 0 < |i-j| < d,
    /// with weight -1 when |i-j| is a multiple of 3 and +1/2 otherwise.
    pub fn build_lattice(nodes: usize, degree: usize) -> Result<Self> {
        if degree == 0 || 2 * degree >= nodes {
            return Err(Error::config(format!(
                "lattice degree {degree} out of range 1..{}",
                nodes.div_ceil(2)
            )));
        }
        let mut offsets = Vec::with_capacity(nodes + 1);
        let mut sources = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for j in 0..nodes {
            let lo = j.saturating_sub(degree - 1);
            let hi = (j + degree - 1).min(nodes - 1);
            for i in lo..=hi {
                if i == j {
                    continue;
                }
                sources.push(i as u32);
                let dist = j.abs_diff(i);
                weights.push(if dist % 3 == 0 {
                    INHIBITORY_WEIGHT
                } else {
                    EXCITATORY_WEIGHT
                });
            }
            offsets.push(sources.len());
        }
        Ok(BrnNet {
            nodes,
            degree,
            forget_rate: DEFAULT_FORGET_RATE,
            offsets,
            sources,
            weights,
        })
    }

    pub fn with_forget_rate(mut self, f: f64) -> Self {
        assert!(f > 0.0 && f.is_finite(), "forget rate must be positive");
        self.forget_rate = f;
        self
    }

    pub fn to_parts(&self) -> BrnParts {
        BrnParts {
            nodes: self.nodes,
            degree: self.degree,
            forget_rate: self.forget_rate,
            offsets: self.offsets.clone(),
            sources: self.sources.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn from_parts(p: BrnParts) -> Result<Self> {
        if p.nodes == 0 {
            return Err(Error::config("net needs at least one node"));
        }
        if !(p.forget_rate > 0.0 && p.forget_rate.is_finite()) {
            return Err(Error::config("forget rate must be positive and finite"));
        }
        if p.offsets.len() != p.nodes + 1 || p.offsets[0] != 0 {
            return Err(Error::config("offsets must have nodes+1 entries from 0"));
        }
        if p.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("offsets must be non-decreasing"));
        }
        let edges = *p.offsets.last().unwrap();
        if p.sources.len() != edges || p.weights.len() != edges {
            return Err(Error::config("edge arrays do not match offsets"));
        }
        if p.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("edge weights must be finite"));
        }
        for j in 0..p.nodes {
            for &src in &p.sources[p.offsets[j]..p.offsets[j + 1]] {
                if src as usize >= p.nodes || src as usize == j {
                    return Err(Error::config(format!(
                        "edge {src} -> {j} is out of range or a self loop"
                    )));
                }
            }
        }
        Ok(BrnNet {
            nodes: p.nodes,
            degree: p.degree,
            forget_rate: p.forget_rate,
            offsets: p.offsets,
            sources: p.sources,
            weights: p.weights,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn forget_rate(&self) -> f64 {
        self.forget_rate
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    /// Incoming edges of node j as (source, weight), in storage order.
    pub fn incoming(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[j]..self.offsets[j + 1];
        self.sources[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&s, &w)| (s as usize, w))
    }

    /// Order-sensitive hash of the full wiring (sources and weight bits).
    pub fn wiring_fingerprint(&self) -> u64 {
        let dims = [self.nodes as f64, self.degree as f64, self.forget_rate];
        let srcs = self.sources.iter().map(|&s| s as f64);
        crate::numerics::fingerprint_f64(
            dims.into_iter()
                .chain(srcs)
                .chain(self.weights.iter().copied()),
        )
    }

    /// One synchronous update of every node. Input length must equal the node
    /// count. Weights are read-only; only the returned state is new.
    pub fn step(&self, state: &BrnState, input: &[f64]) -> Result<BrnState> {
        if state.len() != self.nodes {
            return Err(Error::DimMismatch {
                context: "brn step state",
                expected: self.nodes,
                actual: state.len(),
            });
        }
        if input.len() != self.nodes {
            return Err(Error::DimMismatch {
                context: "brn step input",
                expected: self.nodes,
                actual: input.len(),
            });
        }
        let prev = &state.activations;
        let mut next = Vec::with_capacity(self.nodes);
        for j in 0..self.nodes {
            let mut acc = input[j];
            let span = self.offsets[j]..self.offsets[j + 1];
            for (&s, &w) in self.sources[span.clone()].iter().zip(&self.weights[span]) {
                acc += w * prev[s as usize];
            }
            let drive = self.forget_rate * acc;
            next.push(if drive > 0.0 { drive } else { 0.0 });
        }
        Ok(BrnState { activations: next })
    }

    /// Run `steps` updates from the zero state; row r of the result is the
    /// state after r+1 updates ("step r+1"). The pattern is injected at the
    /// first step only (single-shot) or at every step (repetitive).
    pub fn impulse_trace(
        &self,
        mode: FiringMode,
        pattern: &[f64],
        steps: usize,
    ) -> Result<Mat> {
        if pattern.len() != self.nodes {
            return Err(Error::DimMismatch {
                context: "impulse pattern",
                expected: self.nodes,
                actual: pattern.len(),
            });
        }
        let zeros = vec![0.0; self.nodes];
        let mut trace = Mat::zeros(steps, self.nodes);
        let mut state = BrnState::zeros(self.nodes);
        for r in 0..steps {
            let input = match mode {
                FiringMode::SingleShot if r > 0 => &zeros[..],
                _ => pattern,
            };
            state = self.step(&state, input)?;
            trace.row_mut(r).copy_from_slice(&state.activations);
        }
        Ok(trace)
    }
}
