//! Reuse-factor driven resource and latency estimation.
//!
//! The reuse factor is the parallelism knob: a layer's multiplications are
//! time-shared over `rf` steps, so it deploys `ceil(mult_count / rf)`
//! multipliers. Dense layers (and the zero-multiplier layers) occupy the
//! array for `rf` steps plus a constant pipeline fill; a streaming Conv1D
//! serializes over its output positions, one `rf`-step burst each. The model
//! is a design-space explorer with monotone trends, not a cycle-accurate
//! synthesis predictor, so absolute numbers carry generous sanity bands and
//! the logic-unit scale is an uncalibrated placeholder.

use serde::{Deserialize, Serialize};

use crate::nn::{LayerKind, ModelDescriptor};
use crate::quant::PrecisionPlan;

/// Pipeline fill cost added to every layer, in cycles.
pub const PIPELINE_FILL: u64 = 8;

/// Abstract logic units per deployed multiplier (uncalibrated placeholder).
pub const LOGIC_UNITS_PER_MULTIPLIER: u64 = 64;

/// Default reuse factor plus per-layer overrides. Override keys may use a
/// single `*` wildcard (`"dense*"`, `"*sigmoid"`); first match wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuseMap {
    pub default_rf: u32,
    overrides: Vec<(String, u32)>,
}

impl ReuseMap {
    pub fn new(default_rf: u32) -> Self {
        assert!(default_rf >= 1, "reuse factor must be positive");
        Self {
            default_rf,
            overrides: Vec::new(),
        }
    }

    pub fn with_override(mut self, pattern: &str, rf: u32) -> Self {
        assert!(rf >= 1, "reuse factor must be positive");
        self.overrides.push((pattern.to_string(), rf));
        self
    }

    /// Parses the CLI override syntax `"pattern:rf,pattern:rf"`.
    pub fn parse_overrides(mut self, text: &str) -> Result<Self, String> {
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (pattern, rf) = part
                .split_once(':')
                .ok_or_else(|| format!("override {part:?} is not pattern:rf"))?;
            let rf: u32 = rf
                .trim()
                .parse()
                .map_err(|_| format!("bad reuse factor in {part:?}"))?;
            if rf < 1 {
                return Err(format!("reuse factor in {part:?} must be >= 1"));
            }
            self.overrides.push((pattern.trim().to_string(), rf));
        }
        Ok(self)
    }

    pub fn rf_for(&self, layer_name: &str) -> u32 {
        self.overrides
            .iter()
            .find(|(p, _)| glob_match(p, layer_name))
            .map(|&(_, rf)| rf)
            .unwrap_or(self.default_rf)
    }
}

fn glob_match(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == name,
        Some((prefix, suffix)) => {
            name.len() >= prefix.len() + suffix.len()
                && name.starts_with(prefix)
                && name.ends_with(suffix)
        }
    }
}

/// Multiplications one forward pass performs in a layer: Dense in*out,
/// same-padded Conv1D len*kernel*in_ch*out_ch, everything else zero.
pub fn mult_count(kind: &LayerKind, input_shape: (usize, usize)) -> u64 {
    let (len, ch) = input_shape;
    match kind {
        LayerKind::Dense { units, .. } => (len * ch * units) as u64,
        LayerKind::Conv1D {
            filters,
            kernel_size,
            ..
        } => (len * kernel_size * ch * filters) as u64,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    pub name: String,
    pub kind: String,
    pub rf: u32,
    pub mult_count: u64,
    pub multipliers: u64,
    /// Idle multiplier-steps from a reuse factor that does not divide the
    /// multiplication count: multipliers * rf - mult_count.
    pub padded_slots: u64,
    pub logic_units: u64,
    pub memory_bits: u64,
    pub cycles: u64,
    pub latency_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub multipliers: u64,
    pub logic_units: u64,
    pub memory_bits: u64,
    pub cycles: u64,
    pub latency_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    /// Layers execute back to back: cycles sum.
    Sequential,
    /// Streaming overlap: the slowest layer dominates, every other layer
    /// contributes its pipeline fill.
    Dataflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub per_layer: Vec<LayerEstimate>,
    pub total: Totals,
    pub clock_hz: f64,
    pub schedule: Schedule,
}

/// Cost inputs of one layer after shape propagation.
#[derive(Debug, Clone)]
pub struct LayerCost {
    pub name: String,
    pub kind: LayerKind,
    pub mult_count: u64,
    pub out_positions: u64,
    pub parameters: u64,
}

pub fn layer_costs(descriptor: &ModelDescriptor) -> Vec<LayerCost> {
    descriptor
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| LayerCost {
            name: layer.name.clone(),
            kind: layer.kind.clone(),
            mult_count: mult_count(&layer.kind, descriptor.input_shape_of(i)),
            out_positions: descriptor.shapes[i].0 as u64,
            parameters: descriptor.parameters_of(i) as u64,
        })
        .collect()
}

/// Resource/latency estimate for one layer at a given reuse factor.
/// `width_bits` is the layer's precision from the plan, which prices weight
/// storage.
pub fn estimate_layer(cost: &LayerCost, rf: u32, width_bits: u32, clock_hz: f64) -> LayerEstimate {
    assert!(rf >= 1 && clock_hz > 0.0);
    let multipliers = cost.mult_count.div_ceil(rf as u64);
    let cycles = match cost.kind {
        // A streaming convolution emits one output position per rf-cycle
        // burst; everything else holds the array rf cycles total.
        LayerKind::Conv1D { .. } => cost.out_positions * rf as u64 + PIPELINE_FILL,
        _ => rf as u64 + PIPELINE_FILL,
    };
    LayerEstimate {
        name: cost.name.clone(),
        kind: cost.kind.name().to_string(),
        rf,
        mult_count: cost.mult_count,
        multipliers,
        padded_slots: multipliers * rf as u64 - cost.mult_count,
        logic_units: multipliers * LOGIC_UNITS_PER_MULTIPLIER,
        memory_bits: cost.parameters * width_bits as u64,
        cycles,
        latency_seconds: cycles as f64 / clock_hz,
    }
}

/// Whole-model estimate: resources always sum; cycles combine per schedule.
pub fn estimate_model(
    descriptor: &ModelDescriptor,
    reuse: &ReuseMap,
    plan: &PrecisionPlan,
    clock_hz: f64,
    schedule: Schedule,
) -> ResourceEstimate {
    let per_layer: Vec<LayerEstimate> = layer_costs(descriptor)
        .iter()
        .map(|cost| {
            let width = plan.spec_of(&cost.name).map(|s| s.total_bits).unwrap_or(16);
            estimate_layer(cost, reuse.rf_for(&cost.name), width, clock_hz)
        })
        .collect();
    let cycles = match schedule {
        Schedule::Sequential => per_layer.iter().map(|l| l.cycles).sum(),
        Schedule::Dataflow => {
            let max = per_layer.iter().map(|l| l.cycles).max().unwrap_or(0);
            max + PIPELINE_FILL * (per_layer.len().saturating_sub(1)) as u64
        }
    };
    let total = Totals {
        multipliers: per_layer.iter().map(|l| l.multipliers).sum(),
        logic_units: per_layer.iter().map(|l| l.logic_units).sum(),
        memory_bits: per_layer.iter().map(|l| l.memory_bits).sum(),
        cycles,
        latency_seconds: cycles as f64 / clock_hz,
    };
    ResourceEstimate {
        per_layer,
        total,
        clock_hz,
        schedule,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub pass: bool,
    pub latency_seconds: f64,
    pub deadline_seconds: f64,
    /// deadline - latency; negative when over budget.
    pub slack_seconds: f64,
}

/// Deadline check, boundary inclusive: latency equal to the deadline passes.
pub fn check_budget(estimate: &ResourceEstimate, deadline_seconds: f64) -> BudgetReport {
    assert!(deadline_seconds > 0.0, "deadline must be positive");
    let latency = estimate.total.latency_seconds;
    BudgetReport {
        pass: latency <= deadline_seconds,
        latency_seconds: latency,
        deadline_seconds,
        slack_seconds: deadline_seconds - latency,
    }
}

impl ResourceEstimate {
    /// Text table, one row per layer plus totals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<18} {:<11} {:>5} {:>11} {:>11} {:>12} {:>12} {:>9} {:>12}\n",
            "layer", "kind", "rf", "mults", "multipliers", "logic", "mem bits", "cycles", "latency"
        ));
        for l in &self.per_layer {
            out.push_str(&format!(
                "{:<18} {:<11} {:>5} {:>11} {:>11} {:>12} {:>12} {:>9} {:>11.3e}\n",
                l.name,
                l.kind,
                l.rf,
                l.mult_count,
                l.multipliers,
                l.logic_units,
                l.memory_bits,
                l.cycles,
                l.latency_seconds,
            ));
        }
        out.push_str(&format!(
            "{:<18} {:<11} {:>5} {:>11} {:>11} {:>12} {:>12} {:>9} {:>11.3e}\n",
            "TOTAL",
            format!("{:?}", self.schedule).to_lowercase(),
            "",
            self.per_layer.iter().map(|l| l.mult_count).sum::<u64>(),
            self.total.multipliers,
            self.total.logic_units,
            self.total.memory_bits,
            self.total.cycles,
            self.total.latency_seconds,
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "layer,kind,rf,mult_count,multipliers,logic_units,memory_bits,cycles,latency_seconds\n",
        );
        for l in &self.per_layer {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                l.name,
                l.kind,
                l.rf,
                l.mult_count,
                l.multipliers,
                l.logic_units,
                l.memory_bits,
                l.cycles,
                l.latency_seconds
            ));
        }
        out.push_str(&format!(
            "TOTAL,{:?},,,{},{},{},{},{}\n",
            self.schedule,
            self.total.multipliers,
            self.total.logic_units,
            self.total.memory_bits,
            self.total.cycles,
            self.total.latency_seconds
        ));
        out
    }
}
