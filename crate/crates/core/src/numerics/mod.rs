//! Elementwise math, bit vectors, and the metrics every other module consumes.

mod mat;
mod rng;

pub use mat::Mat;
pub use rng::RngStream;

use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt;

/// Fixed-length vector of {0,1} values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    /// Panics on any entry other than 0 or 1.
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(
            bits.iter().all(|&b| b <= 1),
            "BitVector entries must be 0 or 1"
        );
        BitVector { bits }
    }

    pub fn zeros(len: usize) -> Self {
        BitVector {
            bits: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> BitVector {
        BitVector {
            bits: self.bits[range].to_vec(),
        }
    }

    pub fn concat(parts: &[&BitVector]) -> BitVector {
        let mut bits = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            bits.extend_from_slice(&p.bits);
        }
        BitVector { bits }
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / self.bits.len() as f64
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Scores for one evaluated run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Metric {
    pub mse: f64,
    /// Fraction of all thresholded output bits matching the target.
    pub hamming_accuracy: f64,
    /// 1 - accuracy restricted to the recall (non-copy) bits.
    pub recall_error: f64,
}

/// Logistic function. The exponent is clamped so the result saturates to
/// 0 or 1 instead of overflowing; never NaN for non-NaN input.
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-700.0, 700.0);
    1.0 / (1.0 + (-x).exp())
}

/// Mean squared error over two equal-length slices.
pub fn mse(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::DimMismatch {
            context: "mse",
            expected: output.len(),
            actual: target.len(),
        });
    }
    if output.is_empty() {
        return Err(Error::config("mse of empty vectors is undefined"));
    }
    let sum: f64 = output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum();
    Ok(sum / output.len() as f64)
}

/// Per-element comparison against `theta`; ties resolve to 1.
pub fn threshold(values: &[f64], theta: f64) -> BitVector {
    BitVector {
        bits: values.iter().map(|&v| (v >= theta) as u8).collect(),
    }
}

/// Fraction of positions where the two bit vectors agree.
pub fn hamming_accuracy(a: &BitVector, b: &BitVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            context: "hamming_accuracy",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let agree = a
        .bits
        .iter()
        .zip(&b.bits)
        .filter(|(x, y)| x == y)
        .count();
    Ok(agree as f64 / a.len() as f64)
}

/// Sliding-window median: element t is the median of series[t..t+w].
/// Output length is len - w + 1. Even windows average the two middle values.
pub fn median_window(series: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::config("median window width must be positive"));
    }
    if w > series.len() {
        return Err(Error::config(format!(
            "median window width {w} exceeds series length {}",
            series.len()
        )));
    }
    let mut out = Vec::with_capacity(series.len() - w + 1);
    let mut buf = vec![0.0; w];
    for t in 0..=series.len() - w {
        buf.copy_from_slice(&series[t..t + w]);
        let mid = w / 2;
        let (_, &mut upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
        let m = if w % 2 == 1 {
            upper
        } else {
            // lower middle is the max of the left partition
            let lower = buf[..mid]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            (lower + upper) / 2.0
        };
        out.push(m);
    }
    Ok(out)
}

/// Order-sensitive FNV-1a over raw f64 bits. Change detection, not crypto.
pub fn fingerprint_f64(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
