//! Deterministic synthetic frame and weight generation, plus frame CSV
//! persistence. Everything is seeded; identical seeds produce identical
//! bytes.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::WorkbenchError;
use crate::nn::{Frame, ModelDescriptor};
use crate::FRAME_LEN;

/// Raw sensor magnitudes span 105,000..120,000; standardized frames are
/// zero-mean unit-variance draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    Raw,
    Standardized,
}

pub const RAW_LOW: f64 = 105_000.0;
pub const RAW_HIGH: f64 = 120_000.0;

/// Generates `n` synthetic frames with sequence numbers 0..n.
pub fn synth_frames(seed: u64, n: usize, mode: FrameMode) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = Uniform::new(RAW_LOW, RAW_HIGH).expect("valid range");
    let normal = Normal::new(0.0, 1.0).expect("valid params");
    (0..n)
        .map(|i| {
            let values: Vec<f64> = (0..FRAME_LEN)
                .map(|_| match mode {
                    FrameMode::Raw => uniform.sample(&mut rng),
                    FrameMode::Standardized => normal.sample(&mut rng),
                })
                .collect();
            Frame::new(values, i as u32, 0).expect("synthetic frames are valid")
        })
        .collect()
}

/// Per-layer weight scale assignment for synthetic models. Layers without
/// parameters need no entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaleProfile {
    scales: BTreeMap<String, f64>,
}

impl ScaleProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, layer: &str, scale: f64) -> Self {
        self.scales.insert(layer.to_string(), scale);
        self
    }

    pub fn get(&self, layer: &str) -> Option<f64> {
        self.scales.get(layer).copied()
    }

    /// Same scale for every parameterized layer of the descriptor.
    pub fn uniform(descriptor: &ModelDescriptor, scale: f64) -> Self {
        let scales = descriptor
            .layers
            .iter()
            .filter(|l| l.kind.has_parameters())
            .map(|l| (l.name.clone(), scale))
            .collect();
        Self { scales }
    }
}

/// Draws weights layer by layer from Normal(0, scale^2) in descriptor order
/// (weights then bias per layer) and returns the flat f32 payload.
pub fn synth_weights(
    seed: u64,
    descriptor: &ModelDescriptor,
    profile: &ScaleProfile,
) -> Result<Vec<u8>, WorkbenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(descriptor.parameters * 4);
    for (i, layer) in descriptor.layers.iter().enumerate() {
        let count = descriptor.parameters_of(i);
        if count == 0 {
            continue;
        }
        let scale = profile
            .get(&layer.name)
            .ok_or_else(|| WorkbenchError::MissingScale {
                layer: layer.name.clone(),
            })?;
        if scale == 0.0 {
            out.extend(std::iter::repeat_n(0.0f32.to_le_bytes(), count).flatten());
            continue;
        }
        let normal = Normal::new(0.0, scale).expect("positive scale");
        for _ in 0..count {
            out.extend_from_slice(&(normal.sample(&mut rng) as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes frames as CSV: one frame per row, 260 columns.
pub fn frames_to_csv(frames: &[Frame]) -> String {
    let mut out = String::new();
    for frame in frames {
        let row: Vec<String> = frame.values().iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Serializes frames as back-to-back input datagrams (the wire format),
/// 1,056 bytes each.
pub fn frames_to_datagrams(frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(frames.len() * crate::node::wire::INPUT_DATAGRAM_LEN);
    for frame in frames {
        out.extend(crate::node::wire::encode_frame(
            frame.seq,
            frame.arrival_ns,
            frame.values(),
        ));
    }
    out
}

/// Reads a concatenated-datagram frame file back. Values round-trip at f32
/// precision, as on the wire.
pub fn frames_from_datagrams(bytes: &[u8]) -> Result<Vec<Frame>, WorkbenchError> {
    let len = crate::node::wire::INPUT_DATAGRAM_LEN;
    if !bytes.len().is_multiple_of(len) {
        return Err(WorkbenchError::Csv {
            line: 0,
            message: format!(
                "datagram file length {} is not a multiple of {len}",
                bytes.len()
            ),
        });
    }
    bytes
        .chunks_exact(len)
        .enumerate()
        .map(|(i, chunk)| {
            let wire = crate::node::wire::decode_frame(chunk).map_err(|e| WorkbenchError::Csv {
                line: i + 1,
                message: format!("{e:?}"),
            })?;
            Frame::new(wire.values, wire.seq, wire.send_timestamp_ns).map_err(|e| {
                WorkbenchError::Csv {
                    line: i + 1,
                    message: e.to_string(),
                }
            })
        })
        .collect()
}

/// Reads frames from CSV; each row must hold exactly 260 finite values.
/// Sequence numbers are row indices.
pub fn frames_from_csv(text: &str) -> Result<Vec<Frame>, WorkbenchError> {
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| WorkbenchError::Csv {
            line: i + 1,
            message: e.to_string(),
        })?;
        let frame =
            Frame::new(values, frames.len() as u32, 0).map_err(|e| WorkbenchError::Csv {
                line: i + 1,
                message: e.to_string(),
            })?;
        frames.push(frame);
    }
    Ok(frames)
}
