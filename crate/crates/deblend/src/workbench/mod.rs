//! Synthetic data and weight generation, standardization, accuracy and
//! outlier metrics, the MI/RR decision rule, and report generation.

pub mod fixtures;
mod report;
mod synth;

pub use report::{accuracy_vs_bits, table2_report, AccuracySweepPoint, Table2Report, Table2Row};
pub use synth::{
    frames_from_csv, frames_from_datagrams, frames_to_csv, frames_to_datagrams, synth_frames,
    synth_weights, FrameMode, ScaleProfile,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::OUTPUT_LEN;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("standardization requires std > 0")]
    BadParams,
    #[error("output arrays must have equal length, a non-zero multiple of {OUTPUT_LEN}")]
    BadShape,
    #[error("frame csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("scale profile has no entry for layer {layer:?}")]
    MissingScale { layer: String },
}

/// Which accelerator is the dominant loss source for a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Mi,
    Rr,
}

impl Decision {
    pub fn as_byte(self) -> u8 {
        match self {
            Decision::Mi => 0,
            Decision::Rr => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Decision::Mi),
            1 => Some(Decision::Rr),
            _ => None,
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Mi => write!(f, "MI"),
            Decision::Rr => write!(f, "RR"),
        }
    }
}

/// Frame-level decision: the source whose summed per-monitor probability is
/// larger wins; an exact tie goes to MI.
pub fn decide_source(values: &[f64]) -> Decision {
    assert_eq!(
        values.len(),
        OUTPUT_LEN,
        "decision needs {OUTPUT_LEN} values"
    );
    let mut mi = 0.0;
    let mut rr = 0.0;
    for pair in values.chunks_exact(2) {
        mi += pair[0];
        rr += pair[1];
    }
    if rr > mi {
        Decision::Rr
    } else {
        Decision::Mi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: f64,
    pub std: f64,
}

impl StandardizationParams {
    pub fn new(mean: f64, std: f64) -> Result<Self, WorkbenchError> {
        if !std.is_finite() || std <= 0.0 {
            return Err(WorkbenchError::BadParams);
        }
        Ok(Self { mean, std })
    }
}

/// Elementwise (x - mean) / std.
pub fn standardize(
    frame: &crate::nn::Frame,
    params: &StandardizationParams,
) -> Result<crate::nn::Frame, WorkbenchError> {
    if !params.std.is_finite() || params.std <= 0.0 {
        return Err(WorkbenchError::BadParams);
    }
    frame
        .map(|v| (v - params.mean) / params.std)
        .map_err(|_| WorkbenchError::BadShape)
}

/// Per-target closeness report over paired reference/test outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of MI outputs with |ref - test| <= threshold.
    pub mi_accuracy: f64,
    pub rr_accuracy: f64,
    /// Mean absolute difference per target.
    pub mi_mean_abs_diff: f64,
    pub rr_mean_abs_diff: f64,
    pub mi_outliers: usize,
    pub rr_outliers: usize,
    pub threshold: f64,
    /// Number of (MI, RR) pairs compared.
    pub pairs: usize,
}

pub const CLOSENESS_THRESHOLD: f64 = 0.20;

/// Compares reference and test outputs pairwise. An output is "close enough"
/// when the absolute difference is within `threshold`, boundary inclusive.
/// MI outputs sit at even indices, RR at odd.
pub fn accuracy(
    reference: &[f64],
    test: &[f64],
    threshold: f64,
) -> Result<AccuracyReport, WorkbenchError> {
    if reference.len() != test.len()
        || reference.is_empty()
        || !reference.len().is_multiple_of(OUTPUT_LEN)
    {
        return Err(WorkbenchError::BadShape);
    }
    let pairs = reference.len() / 2;
    let mut close = [0usize; 2];
    let mut abs_sum = [0.0f64; 2];
    let mut outliers = [0usize; 2];
    for (i, (r, t)) in reference.iter().zip(test.iter()).enumerate() {
        let target = i % 2; // 0 = MI, 1 = RR
        let diff = (r - t).abs();
        abs_sum[target] += diff;
        if diff <= threshold {
            close[target] += 1;
        } else {
            outliers[target] += 1;
        }
    }
    Ok(AccuracyReport {
        mi_accuracy: close[0] as f64 / pairs as f64,
        rr_accuracy: close[1] as f64 / pairs as f64,
        mi_mean_abs_diff: abs_sum[0] / pairs as f64,
        rr_mean_abs_diff: abs_sum[1] / pairs as f64,
        mi_outliers: outliers[0],
        rr_outliers: outliers[1],
        threshold,
        pairs,
    })
}

/// Number of output slots whose |ref - test| exceeds the threshold.
pub fn count_outliers(reference: &[f64], test: &[f64], threshold: f64) -> usize {
    reference
        .iter()
        .zip(test.iter())
        .filter(|(r, t)| (*r - *t).abs() > threshold)
        .count()
}
