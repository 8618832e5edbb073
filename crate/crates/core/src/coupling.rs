//! Coupling of controller and storage network through the interface vector.
//!
//! A fixed subset of network nodes is the interface. Each step runs one
//! cycle: read the interface activations captured at the end of the previous
//! step, run the controller on (input, read), inject the write vector as
//! external input to the interface nodes (all other nodes receive 0), advance
//! the network one step, and capture the new interface activations for the
//! next read. Writes therefore show up in reads one step later, transformed
//! by the network update; the first read after a reset is all zeros.

use crate::brn::{BrnNet, BrnState};
use crate::controller::{FfnParams, ForwardCache};
use crate::error::{Error, Result};
use crate::numerics::{fingerprint_f64, Mat, RngStream};
use std::io::Write;

/// The interface node set, in selection order. Position k of the write and
/// read vectors maps to node `indices[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceMap {
    indices: Vec<u32>,
}

impl InterfaceMap {
    /// Choose `iv_dim` distinct nodes uniformly without replacement.
    pub fn select(nodes: usize, iv_dim: usize, rng: &mut RngStream) -> Result<Self> {
        if iv_dim == 0 || iv_dim > nodes {
            return Err(Error::config(format!(
                "interface size {iv_dim} out of range 1..={nodes}"
            )));
        }
        let indices = rng
            .sample_distinct(nodes, iv_dim)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        Ok(InterfaceMap { indices })
    }

    /// Rebuild from explicit indices (snapshot restore).
    pub fn from_indices(indices: Vec<u32>, nodes: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::config("interface must not be empty"));
        }
        let mut seen = vec![false; nodes];
        for &i in &indices {
            let i = i as usize;
            if i >= nodes {
                return Err(Error::config(format!(
                    "interface index {i} out of range for {nodes} nodes"
                )));
            }
            if seen[i] {
                return Err(Error::config(format!("duplicate interface index {i}")));
            }
            seen[i] = true;
        }
        Ok(InterfaceMap { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint_f64(self.indices.iter().map(|&i| i as f64))
    }
}

/// Everything one step of the coupled model produces.
#[derive(Clone, Debug)]
pub struct WmStepOutput {
    pub y: Vec<f64>,
    pub write: Vec<f64>,
    /// The read vector consumed this step (captured at the previous step).
    pub read: Vec<f64>,
    pub cache: ForwardCache,
}

/// Interface activity of a run: one (read, write) pair per step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IvTrace {
    pub reads: Vec<Vec<f64>>,
    pub writes: Vec<Vec<f64>>,
}

impl IvTrace {
    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn push(&mut self, read: Vec<f64>, write: Vec<f64>) {
        self.reads.push(read);
        self.writes.push(write);
    }

    /// Mean of all read components over the whole trace (reads are
    /// non-negative network activations).
    pub fn mean_read_activation(&self) -> f64 {
        let total: f64 = self.reads.iter().flatten().sum();
        let count: usize = self.reads.iter().map(|r| r.len()).sum();
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Matrix view with one row per interface slot and one column per step.
    pub fn reads_matrix(&self) -> Mat {
        Self::column_per_step(&self.reads)
    }

    pub fn writes_matrix(&self) -> Mat {
        Self::column_per_step(&self.writes)
    }

    fn column_per_step(rows: &[Vec<f64>]) -> Mat {
        let steps = rows.len();
        let dim = rows.first().map_or(0, |r| r.len());
        Mat::from_fn(dim, steps, |k, t| rows[t][k])
    }

    /// Long-format CSV: step, direction (read|write), index, value.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "step,direction,index,value")?;
        for t in 0..self.len() {
            for (k, v) in self.reads[t].iter().enumerate() {
                writeln!(out, "{t},read,{k},{v}")?;
            }
            for (k, v) in self.writes[t].iter().enumerate() {
                writeln!(out, "{t},write,{k},{v}")?;
            }
        }
        Ok(())
    }
}

/// The coupled model: controller, storage net, interface map, and the
/// carried state (network activations + pending read).
#[derive(Clone, Debug)]
pub struct WmModel {
    params: FfnParams,
    net: BrnNet,
    interface: InterfaceMap,
    state: BrnState,
    pending_read: Vec<f64>,
}

impl WmModel {
    pub fn new(params: FfnParams, net: BrnNet, interface: InterfaceMap) -> Result<Self> {
        let iv_dim = params.config().iv_dim;
        if interface.len() != iv_dim {
            return Err(Error::DimMismatch {
                context: "interface size vs iv_dim",
                expected: iv_dim,
                actual: interface.len(),
            });
        }
        if let Some(&max) = interface.indices().iter().max() {
            if max as usize >= net.nodes() {
                return Err(Error::config(format!(
                    "interface index {max} out of range for {} nodes",
                    net.nodes()
                )));
            }
        }
        let nodes = net.nodes();
        Ok(WmModel {
            params,
            net,
            interface,
            state: BrnState::zeros(nodes),
            pending_read: vec![0.0; iv_dim],
        })
    }

    /// Rebuild mid-run state exactly (snapshot restore).
    pub fn from_parts(
        params: FfnParams,
        net: BrnNet,
        interface: InterfaceMap,
        state: BrnState,
        pending_read: Vec<f64>,
    ) -> Result<Self> {
        if state.len() != net.nodes() {
            return Err(Error::DimMismatch {
                context: "restored state length",
                expected: net.nodes(),
                actual: state.len(),
            });
        }
        if pending_read.len() != params.config().iv_dim {
            return Err(Error::DimMismatch {
                context: "restored pending read length",
                expected: params.config().iv_dim,
                actual: pending_read.len(),
            });
        }
        let mut model = WmModel::new(params, net, interface)?;
        model.state = state;
        model.pending_read = pending_read;
        Ok(model)
    }

    pub fn params(&self) -> &FfnParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut FfnParams {
        &mut self.params
    }

    pub fn net(&self) -> &BrnNet {
        &self.net
    }

    pub fn interface(&self) -> &InterfaceMap {
        &self.interface
    }

    pub fn state(&self) -> &BrnState {
        &self.state
    }

    pub fn pending_read(&self) -> &[f64] {
        &self.pending_read
    }

    /// Clear network activations and the pending read. The next step reads
    /// all zeros, exactly like a freshly built model.
    pub fn reset(&mut self) {
        self.state = BrnState::zeros(self.net.nodes());
        self.pending_read = vec![0.0; self.params.config().iv_dim];
    }

    /// One full cycle: read -> controller -> inject write -> advance net ->
    /// capture next read.
    pub fn step(&mut self, x: &[f64]) -> Result<WmStepOutput> {
        let read = self.pending_read.clone();
        let cache = self.params.forward(x, &read)?;

        let mut injection = vec![0.0; self.net.nodes()];
        for (k, &node) in self.interface.indices().iter().enumerate() {
            injection[node as usize] = cache.write[k];
        }
        self.state = self.net.step(&self.state, &injection)?;
        for (k, &node) in self.interface.indices().iter().enumerate() {
            self.pending_read[k] = self.state.activations[node as usize];
        }

        Ok(WmStepOutput {
            y: cache.y.clone(),
            write: cache.write.clone(),
            read,
            cache,
        })
    }

    /// Reset, then run the whole input sequence. Returns the raw outputs and
    /// the interface trace.
    pub fn run_sequence(&mut self, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, IvTrace)> {
        self.reset();
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut trace = IvTrace::default();
        for x in inputs {
            let out = self.step(x)?;
            trace.push(out.read, out.write);
            outputs.push(out.y);
        }
        Ok((outputs, trace))
    }
}
