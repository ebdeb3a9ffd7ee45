//! Tensors for the two inference paths: `Tensor` holds f64 activations,
//! `QTensor` holds integer codes under a single per-tensor spec.
//!
//! Layout is row-major over (length, channels): element (pos, ch) lives at
//! `pos * channels + ch`. Flattening (260, 2) therefore interleaves the
//! channel pair per position, which is exactly the output pair layout.

use crate::fxp::FixedSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub len: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(len: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), len * channels);
        Self {
            len,
            channels,
            data,
        }
    }

    pub fn zeros(len: usize, channels: usize) -> Self {
        Self::new(len, channels, vec![0.0; len * channels])
    }

    pub fn get(&self, pos: usize, ch: usize) -> f64 {
        self.data[pos * self.channels + ch]
    }

    pub fn set(&mut self, pos: usize, ch: usize, v: f64) {
        self.data[pos * self.channels + ch] = v;
    }
}

/// Fixed-point tensor: every element shares one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    pub len: usize,
    pub channels: usize,
    pub codes: Vec<i64>,
    pub spec: FixedSpec,
}

impl QTensor {
    pub fn new(len: usize, channels: usize, codes: Vec<i64>, spec: FixedSpec) -> Self {
        debug_assert_eq!(codes.len(), len * channels);
        Self {
            len,
            channels,
            codes,
            spec,
        }
    }

    pub fn get(&self, pos: usize, ch: usize) -> i64 {
        self.codes[pos * self.channels + ch]
    }

    /// Exact real values of all codes, in layout order.
    pub fn to_reals(&self) -> Vec<f64> {
        let ulp = self.spec.ulp();
        self.codes.iter().map(|&c| c as f64 * ulp).collect()
    }
}
