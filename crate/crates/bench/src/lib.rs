//! Shared fixtures for the kernel benchmarks: everything is built at the
//! default first-order scale (1000-node net, degree 20, 350 interface
//! slots, 512-wide controller) so the numbers track the real training cost.

use wmbind_core::harness::{build_model, TrainConfig};
use wmbind_core::numerics::RngStream;
use wmbind_core::{BrnNet, BrnState, ForwardCache, RmspropState, WmModel};

pub fn desk_config() -> TrainConfig {
    TrainConfig::default()
}

pub fn desk_model() -> (WmModel, RmspropState) {
    build_model(&desk_config()).expect("default config builds")
}

/// Net, a warmed-up state, and a dense injection vector.
///
/// Ten warm-up steps push the state off the origin so the benched step
/// exercises the same mix of active and silent nodes training sees.
pub fn warm_net() -> (BrnNet, BrnState, Vec<f64>) {
    let cfg = desk_config();
    let mut rng = RngStream::new(17).fork("bench-net");
    let net = BrnNet::build_random(cfg.brn_nodes, cfg.brn_degree, &mut rng).expect("net builds");
    let injection: Vec<f64> = (0..net.nodes()).map(|_| rng.uniform01()).collect();
    let mut state = BrnState::zeros(net.nodes());
    for _ in 0..10 {
        state = net.step(&state, &injection).expect("sized injection");
    }
    (net, state, injection)
}

/// An input/read pair plus the forward cache the training update consumes.
pub fn controller_inputs(model: &WmModel) -> (Vec<f64>, Vec<f64>, Vec<f64>, ForwardCache) {
    let cfg = model.params().config();
    let mut rng = RngStream::new(17).fork("bench-ffn");
    let x: Vec<f64> = (0..cfg.input_dim).map(|_| rng.bit() as f64).collect();
    let read: Vec<f64> = (0..cfg.iv_dim).map(|_| rng.uniform01()).collect();
    let target: Vec<f64> = (0..cfg.output_dim).map(|_| rng.bit() as f64).collect();
    let cache = model.params().forward(&x, &read).expect("sized inputs");
    (x, read, target, cache)
}
