//! The real-time frame service: receives sensor frames over UDP, drives an
//! inference engine, emits de-blending decisions, and tracks the 3 ms
//! deadline. Also the fixed-rate replay driver and run statistics.

mod queue;
mod replay;
mod service;
mod stats;
pub mod wire;

pub use queue::BoundedQueue;
pub use replay::{replay, replay_synthetic, SenderReport};
pub use service::{serve, CounterSnapshot, Node, NodeHandle, NodeOptions};
pub use stats::{
    records_from_csv, records_to_csv, stats_report, LatencyRecord, LatencySummary, RunStats,
    HISTOGRAM_BIN_NS,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{BridgeState, TimingConfig};
use crate::nn::{Model, ModelDescriptor};
use crate::quant::{quantize_model, PrecisionPlan, QuantizedModel};
use crate::workbench::StandardizationParams;

/// Default decision deadline: one frame period at the deployed poll rate.
pub const DEFAULT_DEADLINE_NS: u64 = 3_000_000;
pub const DEFAULT_QUEUE_CAPACITY: usize = 4;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("model load error: {0}")]
    ModelLoad(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("statistics need at least one record")]
    NoRecords,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineKind {
    FloatOracle,
    Quantized,
    BridgeSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropPolicy {
    DropOldest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub listen: String,
    pub emit: String,
    #[serde(default = "default_deadline")]
    pub deadline_ns: u64,
    pub engine: EngineKind,
    pub model_path: PathBuf,
    pub weights_path: PathBuf,
    /// Required for the quantized and bridge engines.
    #[serde(default)]
    pub plan_path: Option<PathBuf>,
    /// Bridge timing; defaults when absent.
    #[serde(default)]
    pub timing_path: Option<PathBuf>,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_drop_policy")]
    pub drop_policy: DropPolicy,
    #[serde(default)]
    pub standardize: Option<StandardizationParams>,
}

fn default_deadline() -> u64 {
    DEFAULT_DEADLINE_NS
}

fn default_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

fn default_drop_policy() -> DropPolicy {
    DropPolicy::DropOldest
}

impl NodeConfig {
    pub fn from_json(text: &str) -> Result<Self, NodeError> {
        let config: NodeConfig =
            serde_json::from_str(text).map_err(|e| NodeError::Config(e.to_string()))?;
        if config.deadline_ns == 0 {
            return Err(NodeError::Config("deadline must be positive".into()));
        }
        if config.queue_capacity == 0 {
            return Err(NodeError::Config(
                "queue capacity must be at least 1".into(),
            ));
        }
        Ok(config)
    }
}

/// The inference engine behind the service.
pub enum Engine {
    FloatOracle(Model),
    Quantized(QuantizedModel),
    BridgeSim {
        qm: QuantizedModel,
        state: Box<BridgeState>,
    },
}

impl Engine {
    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::FloatOracle(_) => EngineKind::FloatOracle,
            Engine::Quantized(_) => EngineKind::Quantized,
            Engine::BridgeSim { .. } => EngineKind::BridgeSim,
        }
    }

    /// Loads the engine described by a node config, checking the frame I/O
    /// contract up front.
    pub fn from_config(config: &NodeConfig) -> Result<Self, NodeError> {
        let load = |p: &PathBuf| {
            std::fs::read(p).map_err(|e| NodeError::ModelLoad(format!("{}: {e}", p.display())))
        };
        let descriptor_text = load(&config.model_path)?;
        let descriptor = ModelDescriptor::from_json(
            std::str::from_utf8(&descriptor_text)
                .map_err(|e| NodeError::ModelLoad(e.to_string()))?,
        )
        .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
        descriptor
            .check_frame_io()
            .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
        let weight_file = load(&config.weights_path)?;
        let payload = crate::nn::read_weights_file(&weight_file)
            .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
        let model = Model::load_weights(payload, &descriptor)
            .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
        let plan = |path: &Option<PathBuf>| -> Result<PrecisionPlan, NodeError> {
            let path = path
                .as_ref()
                .ok_or_else(|| NodeError::Config("engine requires a plan_path".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| NodeError::ModelLoad(format!("{}: {e}", path.display())))?;
            PrecisionPlan::from_json(&text).map_err(|e| NodeError::ModelLoad(e.to_string()))
        };
        match config.engine {
            EngineKind::FloatOracle => Ok(Engine::FloatOracle(model)),
            EngineKind::Quantized => {
                let qm = quantize_model(&model, &plan(&config.plan_path)?)
                    .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
                Ok(Engine::Quantized(qm))
            }
            EngineKind::BridgeSim => {
                let qm = quantize_model(&model, &plan(&config.plan_path)?)
                    .map_err(|e| NodeError::ModelLoad(e.to_string()))?;
                // the buffer ports are 16 bits wide; reject wider plans at
                // startup rather than failing per transaction
                for layer in [
                    qm.model.descriptor.entry_layer().name.clone(),
                    qm.model.descriptor.output_layer().name.clone(),
                ] {
                    let spec = qm.plan.spec_of(&layer).expect("plan covers the model");
                    if spec.total_bits != 16 {
                        return Err(NodeError::Config(format!(
                            "bridge engine requires 16-bit entry/output specs, {layer} has {spec}"
                        )));
                    }
                }
                let timing = match &config.timing_path {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            NodeError::ModelLoad(format!("{}: {e}", path.display()))
                        })?;
                        TimingConfig::from_json(&text)
                            .map_err(|e| NodeError::ModelLoad(e.to_string()))?
                    }
                    None => TimingConfig::default(),
                };
                Ok(Engine::BridgeSim {
                    qm,
                    state: Box::new(BridgeState::new(timing)),
                })
            }
        }
    }

    /// Runs one frame. Returns the output and the engine latency: wall time
    /// for in-process engines, simulated transaction latency for the bridge.
    pub fn infer(&mut self, frame: &crate::nn::Frame) -> (crate::nn::InferenceOutput, u64) {
        match self {
            Engine::FloatOracle(model) => {
                let started = std::time::Instant::now();
                let out = crate::nn::infer_float(model, frame);
                (out, started.elapsed().as_nanos() as u64)
            }
            Engine::Quantized(qm) => {
                let started = std::time::Instant::now();
                let out = crate::nn::infer_quantized(qm, frame);
                (out, started.elapsed().as_nanos() as u64)
            }
            Engine::BridgeSim { qm, state } => {
                let (out, trace) = crate::bridge::run_transaction(state, frame, qm)
                    .expect("single-threaded engine stage never overlaps transactions");
                (out, trace.total_latency_ns)
            }
        }
    }
}
