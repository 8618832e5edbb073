//! Model persistence. One JSON document holds the resolved config, every
//! weight block as a flat array, the net wiring, the live state, and the
//! optimizer accumulators — enough to continue a run bit-identically.
//! Restoring revalidates everything; a truncated or tampered document never
//! yields a partial model.

use crate::brn::{BrnNet, BrnParts, BrnState};
use crate::controller::{FfnParams, RmspropState};
use crate::coupling::{InterfaceMap, WmModel};
use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::numerics::Mat;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const SNAPSHOT_VERSION: &str = "wmbind-snapshot/1";

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    version: String,
    config: TrainConfig,
    interface: Vec<u32>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    w3: Vec<f64>,
    w4_out: Vec<f64>,
    w4_write: Vec<f64>,
    brn: BrnParts,
    activations: Vec<f64>,
    pending_read: Vec<f64>,
    opt_rho: f64,
    opt_epsilon: f64,
    acc_w1: Vec<f64>,
    acc_w2: Vec<f64>,
    acc_w3: Vec<f64>,
    acc_w4_out: Vec<f64>,
}

fn doc_of(model: &WmModel, opt: &RmspropState, cfg: &TrainConfig) -> SnapshotDoc {
    let p = model.params();
    SnapshotDoc {
        version: SNAPSHOT_VERSION.to_string(),
        config: cfg.clone(),
        interface: model.interface().indices().to_vec(),
        w1: p.w1().data().to_vec(),
        w2: p.w2().data().to_vec(),
        w3: p.w3().data().to_vec(),
        w4_out: p.w4_out().data().to_vec(),
        w4_write: p.w4_write().data().to_vec(),
        brn: model.net().to_parts(),
        activations: model.state().activations.clone(),
        pending_read: model.pending_read().to_vec(),
        opt_rho: opt.rho,
        opt_epsilon: opt.epsilon,
        acc_w1: opt.acc_w1.data().to_vec(),
        acc_w2: opt.acc_w2.data().to_vec(),
        acc_w3: opt.acc_w3.data().to_vec(),
        acc_w4_out: opt.acc_w4_out.data().to_vec(),
    }
}

pub fn to_json(model: &WmModel, opt: &RmspropState, cfg: &TrainConfig) -> Result<String> {
    Ok(serde_json::to_string(&doc_of(model, opt, cfg))?)
}

fn sized_mat(name: &str, data: Vec<f64>, rows: usize, cols: usize) -> Result<Mat> {
    if data.len() != rows * cols {
        return Err(Error::snapshot(format!(
            "{name} holds {} values, expected {rows}x{cols}",
            data.len()
        )));
    }
    Ok(Mat::from_flat(rows, cols, data))
}

pub fn from_json(text: &str) -> Result<(WmModel, RmspropState, TrainConfig)> {
    let doc: SnapshotDoc = serde_json::from_str(text)?;
    if doc.version != SNAPSHOT_VERSION {
        return Err(Error::snapshot(format!(
            "version {:?} not readable by this build (wants {SNAPSHOT_VERSION:?})",
            doc.version
        )));
    }
    let cfg = doc.config;
    cfg.validate()?;
    let ffn_cfg = cfg.ffn_config();
    let [d_in, d1, d2, d3, _] = ffn_cfg.layer_widths();

    if doc.brn.nodes != cfg.brn_nodes {
        return Err(Error::snapshot(format!(
            "net has {} nodes but config says {}",
            doc.brn.nodes, cfg.brn_nodes
        )));
    }
    if doc.interface.len() != cfg.interface_dim {
        return Err(Error::snapshot(format!(
            "interface holds {} indices but config says {}",
            doc.interface.len(),
            cfg.interface_dim
        )));
    }

    let params = FfnParams::from_blocks(
        ffn_cfg,
        sized_mat("w1", doc.w1, d_in, d1)?,
        sized_mat("w2", doc.w2, d1, d2)?,
        sized_mat("w3", doc.w3, d2, d3)?,
        sized_mat("w4_out", doc.w4_out, d3, ffn_cfg.output_dim)?,
        sized_mat("w4_write", doc.w4_write, d3, ffn_cfg.iv_dim)?,
    )?;
    let net = BrnNet::from_parts(doc.brn)?;
    let interface = InterfaceMap::from_indices(doc.interface, cfg.brn_nodes)?;
    let model = WmModel::from_parts(
        params,
        net,
        interface,
        BrnState {
            activations: doc.activations,
        },
        doc.pending_read,
    )?;
    let opt = RmspropState {
        rho: doc.opt_rho,
        epsilon: doc.opt_epsilon,
        acc_w1: sized_mat("acc_w1", doc.acc_w1, d_in, d1)?,
        acc_w2: sized_mat("acc_w2", doc.acc_w2, d1, d2)?,
        acc_w3: sized_mat("acc_w3", doc.acc_w3, d2, d3)?,
        acc_w4_out: sized_mat("acc_w4_out", doc.acc_w4_out, d3, ffn_cfg.output_dim)?,
    };
    Ok((model, opt, cfg))
}

pub fn save(
    path: &Path,
    model: &WmModel,
    opt: &RmspropState,
    cfg: &TrainConfig,
) -> Result<()> {
    fs::write(path, to_json(model, opt, cfg)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(WmModel, RmspropState, TrainConfig)> {
    from_json(&fs::read_to_string(path)?)
}
