//! Layer-graph neural-network engine.
//!
//! The engine runs the same acyclic layer graph two ways: [`infer_float`]
//! is the double-precision reference path, and [`infer_quantized`] executes
//! the graph in fixed point under a per-layer precision plan, recording
//! overflow events per layer. The quantized path is bit-deterministic: all
//! arithmetic is exact integer work re-gridded once per output element.

mod descriptor;
mod fixed;
mod float;
mod model;
mod sigmoid;
mod tensor;

pub use descriptor::{LayerDescriptor, LayerKind, ModelDescriptor, PadMode, INPUT_NODE};
pub use fixed::{forward_quantized, infer_fixed, infer_quantized};
pub use float::{forward_float, infer_float};
pub use model::{
    read_weights_file, reference_mlp, reference_unet, write_weights_file, Model, WEIGHTS_FORMAT,
};
pub use sigmoid::SigmoidTable;
pub use tensor::{QTensor, Tensor};

use thiserror::Error;

use crate::fxp::OverflowLog;
use crate::workbench::Decision;
use crate::{FRAME_LEN, OUTPUT_LEN};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("descriptor parse error: {0}")]
    Parse(String),
    #[error("shape error at layer {layer:?}: {message}")]
    Shape { layer: String, message: String },
    #[error("weight buffer size mismatch: expected {expected} bytes, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("precision plan has no entry for layer {layer:?}")]
    PlanMismatch { layer: String },
    #[error("frame must hold {FRAME_LEN} finite values")]
    BadFrame,
}

/// One synchronized vector of 260 sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    values: Vec<f64>,
    pub seq: u32,
    pub arrival_ns: u64,
}

impl Frame {
    pub fn new(values: Vec<f64>, seq: u32, arrival_ns: u64) -> Result<Self, NnError> {
        if values.len() != FRAME_LEN || values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::BadFrame);
        }
        Ok(Self {
            values,
            seq,
            arrival_ns,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` elementwise, keeping sequence number and timestamp.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, NnError> {
        Frame::new(
            self.values.iter().map(|&v| f(v)).collect(),
            self.seq,
            self.arrival_ns,
        )
    }
}

/// The 520-value inference result: 260 (MI, RR) probability pairs laid out
/// as index 2i = MI of monitor i, 2i+1 = RR, plus the frame-level decision.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOutput {
    pub values: Vec<f64>,
    pub decision: Decision,
    /// Per-layer saturation/wrap counts; empty on the float path.
    pub overflow: OverflowLog,
}

impl InferenceOutput {
    pub(crate) fn from_values(values: Vec<f64>, overflow: OverflowLog) -> Self {
        debug_assert_eq!(values.len(), OUTPUT_LEN);
        let decision = crate::workbench::decide_source(&values);
        Self {
            values,
            decision,
            overflow,
        }
    }
}
