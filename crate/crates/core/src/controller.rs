//! Feed-forward controller: the only trainable part of the model.
//!
//! Four layers. The three hidden transforms are linear (no bias, no
//! activation); the output layer applies a sigmoid. The input layer sees the
//! task input concatenated with the read vector; the output layer produces
//! the task output concatenated with the write vector. The write block
//! (`w4_write`) is drawn uniform on [0,1] at init and never trained; every
//! other block is trained by RMSprop on hand-derived MSE gradients. No
//! gradient ever flows into the read vector or beyond this step.

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Mat, RngStream};
use serde::{Deserialize, Serialize};

/// Where the write vector is taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvWiring {
    /// Default: write = sigmoid(w4_write' * h3).
    Layer4,
    /// Ablation: write = sigmoid of the first iv_dim components of h3;
    /// w4_write is unused.
    Layer3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfnConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub iv_dim: usize,
    pub controller_dim: usize,
    pub iv_wiring: IvWiring,
}

impl FfnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.iv_dim == 0 {
            return Err(Error::config("all controller dimensions must be positive"));
        }
        let needed = self.iv_dim + self.input_dim.max(self.output_dim);
        if self.controller_dim < needed {
            return Err(Error::config(format!(
                "controller_dim {} is below iv_dim {} + max(input_dim {}, output_dim {}) = {}",
                self.controller_dim, self.iv_dim, self.input_dim, self.output_dim, needed
            )));
        }
        Ok(())
    }

    /// Widths of the five activation vectors: input, h1, h2, h3, output.
    pub fn layer_widths(&self) -> [usize; 5] {
        [
            self.input_dim + self.iv_dim,
            self.controller_dim,
            2 * self.controller_dim,
            self.controller_dim,
            self.output_dim + self.iv_dim,
        ]
    }
}

/// The five weight blocks. `w1`, `w2`, `w3`, `w4_out` are trainable;
/// `w4_write` is fixed at init.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnParams {
    cfg: FfnConfig,
    w1: Mat,       // (input_dim + iv_dim) x controller_dim
    w2: Mat,       // controller_dim x 2*controller_dim
    w3: Mat,       // 2*controller_dim x controller_dim
    w4_out: Mat,   // controller_dim x output_dim
    w4_write: Mat, // controller_dim x iv_dim
}

/// Activations of one forward pass, kept for the same step's backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// concat(x, read)
    pub input: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub h3: Vec<f64>,
    /// pre-sigmoid output logits
    pub z_out: Vec<f64>,
    pub y: Vec<f64>,
    pub write: Vec<f64>,
}

/// Gradients of the trainable blocks. The write path is fixed by
/// construction, so no w4_write block exists here.
#[derive(Clone, Debug)]
pub struct FfnGrads {
    pub w1: Mat,
    pub w2: Mat,
    pub w3: Mat,
    pub w4_out: Mat,
}

impl FfnParams {
    /// Trainable blocks are uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in));
    /// the write block is uniform on [0, 1). Draw order is fixed (w1, w2,
    /// w3, w4_out, w4_write, row-major) so a seed pins every weight.
    pub fn init(cfg: FfnConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let [d_in, d1, d2, d3, _] = cfg.layer_widths();
        let trainable = |rows: usize, cols: usize, rng: &mut RngStream| {
            let s = 1.0 / (rows as f64).sqrt();
            Mat::from_fn(rows, cols, |_, _| rng.uniform(-s, s))
        };
        let w1 = trainable(d_in, d1, rng);
        let w2 = trainable(d1, d2, rng);
        let w3 = trainable(d2, d3, rng);
        let w4_out = trainable(d3, cfg.output_dim, rng);
        let w4_write = Mat::from_fn(d3, cfg.iv_dim, |_, _| rng.uniform01());
        Ok(FfnParams {
            cfg,
            w1,
            w2,
            w3,
            w4_out,
            w4_write,
        })
    }

    /// Rebuild from explicit blocks (snapshot restore, fixtures).
    pub fn from_blocks(
        cfg: FfnConfig,
        w1: Mat,
        w2: Mat,
        w3: Mat,
        w4_out: Mat,
        w4_write: Mat,
    ) -> Result<Self> {
        cfg.validate()?;
        let [d_in, d1, d2, d3, _] = cfg.layer_widths();
        let expect = [
            ("w1", &w1, d_in, d1),
            ("w2", &w2, d1, d2),
            ("w3", &w3, d2, d3),
            ("w4_out", &w4_out, d3, cfg.output_dim),
            ("w4_write", &w4_write, d3, cfg.iv_dim),
        ];
        for (name, m, r, c) in expect {
            if m.rows() != r || m.cols() != c {
                return Err(Error::config(format!(
                    "block {name} has shape {}x{}, expected {r}x{c}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(FfnParams {
            cfg,
            w1,
            w2,
            w3,
            w4_out,
            w4_write,
        })
    }

    pub fn config(&self) -> &FfnConfig {
        &self.cfg
    }

    pub fn w1(&self) -> &Mat {
        &self.w1
    }

    pub fn w2(&self) -> &Mat {
        &self.w2
    }

    pub fn w3(&self) -> &Mat {
        &self.w3
    }

    pub fn w4_out(&self) -> &Mat {
        &self.w4_out
    }

    pub fn w4_write(&self) -> &Mat {
        &self.w4_write
    }

    /// One forward pass. `x` is the task input, `read` the interface read
    /// vector; both are consumed as-is (no gradient bookkeeping beyond the
    /// returned cache).
    pub fn forward(&self, x: &[f64], read: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.cfg.input_dim {
            return Err(Error::DimMismatch {
                context: "ffn forward input",
                expected: self.cfg.input_dim,
                actual: x.len(),
            });
        }
        if read.len() != self.cfg.iv_dim {
            return Err(Error::DimMismatch {
                context: "ffn forward read",
                expected: self.cfg.iv_dim,
                actual: read.len(),
            });
        }
        let mut input = Vec::with_capacity(x.len() + read.len());
        input.extend_from_slice(x);
        input.extend_from_slice(read);

        let mut h1 = vec![0.0; self.w1.cols()];
        self.w1.vec_mat(&input, &mut h1);
        let mut h2 = vec![0.0; self.w2.cols()];
        self.w2.vec_mat(&h1, &mut h2);
        let mut h3 = vec![0.0; self.w3.cols()];
        self.w3.vec_mat(&h2, &mut h3);

        let mut z_out = vec![0.0; self.cfg.output_dim];
        self.w4_out.vec_mat(&h3, &mut z_out);
        let y: Vec<f64> = z_out.iter().map(|&z| sigmoid(z)).collect();

        let write: Vec<f64> = match self.cfg.iv_wiring {
            IvWiring::Layer4 => {
                let mut z_write = vec![0.0; self.cfg.iv_dim];
                self.w4_write.vec_mat(&h3, &mut z_write);
                z_write.into_iter().map(sigmoid).collect()
            }
            IvWiring::Layer3 => h3[..self.cfg.iv_dim].iter().map(|&z| sigmoid(z)).collect(),
        };

        Ok(ForwardCache {
            input,
            h1,
            h2,
            h3,
            z_out,
            y,
            write,
        })
    }

    fn check_cache(&self, cache: &ForwardCache, target: &[f64]) -> Result<()> {
        let [d_in, d1, d2, d3, _] = self.cfg.layer_widths();
        let dims = [
            ("cache input", cache.input.len(), d_in),
            ("cache h1", cache.h1.len(), d1),
            ("cache h2", cache.h2.len(), d2),
            ("cache h3", cache.h3.len(), d3),
            ("cache y", cache.y.len(), self.cfg.output_dim),
            ("backward target", target.len(), self.cfg.output_dim),
        ];
        for (context, actual, expected) in dims {
            if actual != expected {
                return Err(Error::DimMismatch {
                    context,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    // delta at the output logits: dL/dz_k for L = mean_k (y_k - t_k)^2,
    // y = sigmoid(z)  =>  dL/dz_k = 2(y_k - t_k)/K * y_k(1 - y_k)
    fn output_delta(&self, cache: &ForwardCache, target: &[f64]) -> Vec<f64> {
        let k = self.cfg.output_dim as f64;
        cache
            .y
            .iter()
            .zip(target)
            .map(|(&y, &t)| 2.0 * (y - t) / k * y * (1.0 - y))
            .collect()
    }

    /// MSE gradients w.r.t. the trainable blocks for one cached step. The
    /// write path carries no loss and is fixed, so it has no gradient; the
    /// hidden layers are linear, so deltas propagate by plain matrix-vector
    /// products.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<FfnGrads> {
        self.check_cache(cache, target)?;
        let delta4 = self.output_delta(cache, target);

        let mut g_w4_out = Mat::zeros(self.w4_out.rows(), self.w4_out.cols());
        g_w4_out.outer_assign(&cache.h3, &delta4);
        let mut d_h3 = vec![0.0; self.w4_out.rows()];
        self.w4_out.mat_vec(&delta4, &mut d_h3);

        let mut g_w3 = Mat::zeros(self.w3.rows(), self.w3.cols());
        g_w3.outer_assign(&cache.h2, &d_h3);
        let mut d_h2 = vec![0.0; self.w3.rows()];
        self.w3.mat_vec(&d_h3, &mut d_h2);

        let mut g_w2 = Mat::zeros(self.w2.rows(), self.w2.cols());
        g_w2.outer_assign(&cache.h1, &d_h2);
        let mut d_h1 = vec![0.0; self.w2.rows()];
        self.w2.mat_vec(&d_h2, &mut d_h1);

        let mut g_w1 = Mat::zeros(self.w1.rows(), self.w1.cols());
        g_w1.outer_assign(&cache.input, &d_h1);

        Ok(FfnGrads {
            w1: g_w1,
            w2: g_w2,
            w3: g_w3,
            w4_out: g_w4_out,
        })
    }

    /// Backward pass and RMSprop update in one sweep, without materializing
    /// gradient blocks. Bit-identical to `backward` + `RmspropState::update`;
    /// `fused_matches_separate_path` in the tests holds the two together.
    pub fn fused_train_update(
        &mut self,
        cache: &ForwardCache,
        target: &[f64],
        opt: &mut RmspropState,
        lr: f64,
    ) -> Result<()> {
        self.check_cache(cache, target)?;
        opt.check_shapes(self)?;
        let delta4 = self.output_delta(cache, target);

        let mut d_h3 = vec![0.0; self.w4_out.rows()];
        self.w4_out.mat_vec(&delta4, &mut d_h3);
        fused_block(&mut self.w4_out, &mut opt.acc_w4_out, &cache.h3, &delta4, opt.rho, opt.epsilon, lr);

        let mut d_h2 = vec![0.0; self.w3.rows()];
        self.w3.mat_vec(&d_h3, &mut d_h2);
        fused_block(&mut self.w3, &mut opt.acc_w3, &cache.h2, &d_h3, opt.rho, opt.epsilon, lr);

        let mut d_h1 = vec![0.0; self.w2.rows()];
        self.w2.mat_vec(&d_h2, &mut d_h1);
        fused_block(&mut self.w2, &mut opt.acc_w2, &cache.h1, &d_h2, opt.rho, opt.epsilon, lr);

        fused_block(&mut self.w1, &mut opt.acc_w1, &cache.input, &d_h1, opt.rho, opt.epsilon, lr);
        Ok(())
    }
}

#[inline(always)]
fn rmsprop_elem(w: &mut f64, acc: &mut f64, g: f64, rho: f64, one_minus_rho: f64, eps: f64, lr: f64) {
    let a = rho * *acc + one_minus_rho * (g * g);
    *acc = a;
    *w -= lr * g / (a.sqrt() + eps);
}

// Fused outer-product gradient + RMSprop over one block:
// g[i][j] = h[i] * delta[j], applied row by row. Rows with h[i] == 0 have
// zero gradient everywhere: the accumulator still decays, the weight is
// untouched (this matches the general formula bit for bit).
fn fused_block(w: &mut Mat, acc: &mut Mat, h: &[f64], delta: &[f64], rho: f64, eps: f64, lr: f64) {
    let one_minus_rho = 1.0 - rho;
    for (i, &hi) in h.iter().enumerate() {
        let acc_row = acc.row_mut(i);
        if hi == 0.0 {
            for a in acc_row {
                *a *= rho;
            }
            continue;
        }
        let w_row = w.row_mut(i);
        for ((wv, av), &dj) in w_row.iter_mut().zip(acc_row.iter_mut()).zip(delta) {
            rmsprop_elem(wv, av, hi * dj, rho, one_minus_rho, eps, lr);
        }
    }
}

/// RMSprop accumulators, one per trainable block.
/// acc <- rho*acc + (1-rho)*g^2;  w <- w - lr*g/(sqrt(acc) + eps)
#[derive(Clone, Debug)]
pub struct RmspropState {
    pub rho: f64,
    pub epsilon: f64,
    pub acc_w1: Mat,
    pub acc_w2: Mat,
    pub acc_w3: Mat,
    pub acc_w4_out: Mat,
}

impl RmspropState {
    pub fn new(params: &FfnParams, rho: f64, epsilon: f64) -> Self {
        RmspropState {
            rho,
            epsilon,
            acc_w1: Mat::zeros(params.w1.rows(), params.w1.cols()),
            acc_w2: Mat::zeros(params.w2.rows(), params.w2.cols()),
            acc_w3: Mat::zeros(params.w3.rows(), params.w3.cols()),
            acc_w4_out: Mat::zeros(params.w4_out.rows(), params.w4_out.cols()),
        }
    }

    fn check_shapes(&self, params: &FfnParams) -> Result<()> {
        let ok = self.acc_w1.rows() == params.w1.rows()
            && self.acc_w1.cols() == params.w1.cols()
            && self.acc_w2.rows() == params.w2.rows()
            && self.acc_w2.cols() == params.w2.cols()
            && self.acc_w3.rows() == params.w3.rows()
            && self.acc_w3.cols() == params.w3.cols()
            && self.acc_w4_out.rows() == params.w4_out.rows()
            && self.acc_w4_out.cols() == params.w4_out.cols();
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "optimizer accumulators do not match parameter shapes",
            ))
        }
    }

    /// Apply one RMSprop step to the trainable blocks. `w4_write` is not an
    /// optimizer target at all.
    pub fn update(&mut self, params: &mut FfnParams, grads: &FfnGrads, lr: f64) -> Result<()> {
        self.check_shapes(params)?;
        let one_minus_rho = 1.0 - self.rho;
        let blocks = [
            (&mut params.w1, &mut self.acc_w1, &grads.w1),
            (&mut params.w2, &mut self.acc_w2, &grads.w2),
            (&mut params.w3, &mut self.acc_w3, &grads.w3),
            (&mut params.w4_out, &mut self.acc_w4_out, &grads.w4_out),
        ];
        for (w, acc, g) in blocks {
            if g.rows() != w.rows() || g.cols() != w.cols() {
                return Err(Error::config(format!(
                    "gradient block shape {}x{} does not match weights {}x{}",
                    g.rows(),
                    g.cols(),
                    w.rows(),
                    w.cols()
                )));
            }
            for ((wv, av), &gv) in w
                .data_mut()
                .iter_mut()
                .zip(acc.data_mut().iter_mut())
                .zip(g.data())
            {
                rmsprop_elem(wv, av, gv, self.rho, one_minus_rho, self.epsilon, lr);
            }
        }
        Ok(())
    }
}
