//! Post-training calibration and precision planning.
//!
//! [`profile`] runs the float path over a calibration set and records the
//! maximum absolute output value of every layer. [`plan_precision`] turns
//! that profile into a per-layer bit allocation: with total width `W` fixed,
//! each layer gets `I = clamp(floor(log2(max_abs)) + 2 + guard_bits, 1, W)`
//! integer bits (sign included), the minimal allocation that keeps `max_abs`
//! strictly inside range. Guard bits add overflow headroom on top.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fxp::{quantize, FixedSpec, FxpError, Overflow, Rounding};
use crate::nn::{forward_float, Frame, Model, ModelDescriptor, SigmoidTable};

pub const PLAN_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
    #[error("profile or plan has no entry for layer {layer:?}")]
    PlanMismatch { layer: String },
    #[error(transparent)]
    BadSpec(#[from] FxpError),
    #[error("plan parse error: {0}")]
    Parse(String),
}

/// Per-layer maximum absolute output over a calibration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub max_abs: BTreeMap<String, f64>,
    pub samples: usize,
}

impl CalibrationProfile {
    pub fn get(&self, layer: &str) -> Option<f64> {
        self.max_abs.get(layer).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Uniform,
    LayerBased,
}

/// Map layer name -> fixed-point spec, all sharing one total width.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionPlan {
    specs: BTreeMap<String, FixedSpec>,
    pub strategy: Strategy,
    pub guard_bits: u32,
}

impl PrecisionPlan {
    pub fn spec_of(&self, layer: &str) -> Result<FixedSpec, QuantError> {
        self.specs
            .get(layer)
            .copied()
            .ok_or_else(|| QuantError::PlanMismatch {
                layer: layer.to_string(),
            })
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, FixedSpec)> {
        self.specs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Shared total width of the plan.
    pub fn total_bits(&self) -> u32 {
        self.specs
            .values()
            .next()
            .map(|s| s.total_bits)
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        let doc = PlanDoc {
            format: PLAN_FORMAT,
            strategy: self.strategy,
            guard_bits: self.guard_bits,
            layers: self
                .specs
                .iter()
                .map(|(name, s)| PlanEntry {
                    layer: name.clone(),
                    w: s.total_bits,
                    i: s.integer_bits,
                    rounding: s.rounding,
                    overflow: s.overflow,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QuantError> {
        let doc: PlanDoc =
            serde_json::from_str(text).map_err(|e| QuantError::Parse(e.to_string()))?;
        if doc.format != PLAN_FORMAT {
            return Err(QuantError::Parse(format!(
                "unsupported plan format {}",
                doc.format
            )));
        }
        let mut specs = BTreeMap::new();
        for e in doc.layers {
            let spec = FixedSpec::new(e.w, e.i, e.rounding, e.overflow)?;
            if specs.insert(e.layer.clone(), spec).is_some() {
                return Err(QuantError::Parse(format!(
                    "duplicate plan entry {:?}",
                    e.layer
                )));
            }
        }
        Ok(Self {
            specs,
            strategy: doc.strategy,
            guard_bits: doc.guard_bits,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PlanEntry {
    layer: String,
    #[serde(rename = "W")]
    w: u32,
    #[serde(rename = "I")]
    i: u32,
    rounding: Rounding,
    overflow: Overflow,
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    format: u32,
    strategy: Strategy,
    guard_bits: u32,
    layers: Vec<PlanEntry>,
}

/// Runs float forward passes over the calibration frames and records the
/// running per-layer max of |output|. The merge is associative and
/// commutative, so the result is order-independent.
pub fn profile(model: &Model, frames: &[Frame]) -> Result<CalibrationProfile, QuantError> {
    if frames.is_empty() {
        return Err(QuantError::EmptyCalibrationSet);
    }
    let names: Vec<&str> = model
        .descriptor
        .layers
        .iter()
        .map(|l| l.name.as_str())
        .collect();
    let mut max_abs: BTreeMap<String, f64> = names.iter().map(|n| (n.to_string(), 0.0)).collect();
    for frame in frames {
        let tensors = forward_float(model, frame.values());
        for (name, tensor) in names.iter().zip(tensors.iter()) {
            let m = tensor.data.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
            let entry = max_abs.get_mut(*name).unwrap();
            if m > *entry {
                *entry = m;
            }
        }
    }
    Ok(CalibrationProfile {
        max_abs,
        samples: frames.len(),
    })
}

/// Integer bits needed so `max_abs` sits strictly inside `[-2^(I-1), 2^(I-1))`:
/// floor(log2(max_abs)) + 2, clamped to [1, total_bits]. A zero max degenerates
/// to I = 1.
fn integer_bits_for(max_abs: f64, total_bits: u32, guard_bits: u32) -> u32 {
    if max_abs <= 0.0 {
        return 1;
    }
    let i = floor_log2(max_abs) + 2 + guard_bits as i64;
    i.clamp(1, total_bits as i64) as u32
}

/// Exact floor(log2(x)) for finite positive x, from the f64 exponent field.
fn floor_log2(x: f64) -> i64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    if biased == 0 {
        // subnormal: frac * 2^-1074, so log2 floors at the top bit - 1074
        let frac = bits & ((1u64 << 52) - 1);
        (63 - frac.leading_zeros() as i64) - 1074
    } else {
        biased - 1023
    }
}

/// Derives the layer-based plan from a calibration profile.
pub fn plan_precision(
    profile: &CalibrationProfile,
    total_bits: u32,
    guard_bits: u32,
) -> Result<PrecisionPlan, QuantError> {
    let mut specs = BTreeMap::new();
    for (layer, &max_abs) in &profile.max_abs {
        let i = integer_bits_for(max_abs, total_bits, guard_bits);
        specs.insert(layer.clone(), FixedSpec::saturating(total_bits, i)?);
    }
    Ok(PrecisionPlan {
        specs,
        strategy: Strategy::LayerBased,
        guard_bits,
    })
}

/// One spec for every layer of the descriptor.
pub fn uniform_plan(
    descriptor: &ModelDescriptor,
    total_bits: u32,
    integer_bits: u32,
) -> Result<PrecisionPlan, QuantError> {
    let spec = FixedSpec::saturating(total_bits, integer_bits)?;
    Ok(PrecisionPlan {
        specs: descriptor
            .layers
            .iter()
            .map(|l| (l.name.clone(), spec))
            .collect(),
        strategy: Strategy::Uniform,
        guard_bits: 0,
    })
}

/// Integer weight codes of one layer under its spec.
#[derive(Debug, Clone, Default)]
pub struct QuantizedLayer {
    pub weights: Vec<i64>,
    pub bias: Vec<i64>,
}

/// A model with every weight and bias quantized to its layer's spec, ready
/// for the fixed-point forward pass. Sigmoid lookup tables are built once
/// here, per sigmoid layer.
#[derive(Debug, Clone)]
pub struct QuantizedModel {
    pub model: Model,
    pub plan: PrecisionPlan,
    pub layers: Vec<QuantizedLayer>,
    pub sigmoid_tables: BTreeMap<String, SigmoidTable>,
    /// Weight/bias codes that saturated during quantization, per layer.
    pub saturated_weights: BTreeMap<String, u64>,
}

impl QuantizedModel {
    pub fn total_saturated_weights(&self) -> u64 {
        self.saturated_weights.values().sum()
    }
}

/// Quantizes every weight tensor to its layer's spec, counting saturated
/// codes per layer.
pub fn quantize_model(model: &Model, plan: &PrecisionPlan) -> Result<QuantizedModel, QuantError> {
    let d = &model.descriptor;
    let mut layers = Vec::with_capacity(d.layers.len());
    let mut saturated = BTreeMap::new();
    let mut sigmoid_tables = BTreeMap::new();
    for (i, layer) in d.layers.iter().enumerate() {
        let spec = plan.spec_of(&layer.name)?;
        let lw = &model.layer_weights[i];
        let mut sat = 0u64;
        let mut quant_all = |vals: &[f64]| -> Vec<i64> {
            vals.iter()
                .map(|&v| {
                    let (q, over) = quantize(v, spec).expect("weights are finite");
                    if over {
                        sat += 1;
                    }
                    q.code
                })
                .collect()
        };
        let q = QuantizedLayer {
            weights: quant_all(&lw.weights),
            bias: quant_all(&lw.bias),
        };
        if layer.kind.has_parameters() {
            saturated.insert(layer.name.clone(), sat);
        }
        if matches!(layer.kind, crate::nn::LayerKind::Sigmoid) {
            sigmoid_tables.insert(layer.name.clone(), SigmoidTable::new(spec));
        }
        layers.push(q);
    }
    Ok(QuantizedModel {
        model: model.clone(),
        plan: plan.clone(),
        layers,
        sigmoid_tables,
        saturated_weights: saturated,
    })
}
