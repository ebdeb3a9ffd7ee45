//! Software model of an edge inference node that attributes beam loss between
//! two co-located accelerators (Main Injector vs Recycler Ring) in real time.
//!
//! The crate re-creates the full node in pure software:
//!
//! - [`fxp`]: bit-exact parameterizable fixed-point arithmetic (`fx<W,I>`)
//!   with saturation, rounding, and overflow accounting;
//! - [`nn`]: a layer-graph inference engine with a double-precision reference
//!   path and a bit-deterministic quantized path;
//! - [`quant`]: post-training calibration and per-layer precision planning;
//! - [`perf`]: reuse-factor driven resource/latency estimation and deadline
//!   budgeting;
//! - [`bridge`]: a deterministic simulator of the memory-mapped host/IP data
//!   path with bit-exact buffer packing;
//! - [`node`]: the real-time UDP frame service, replay driver, and latency
//!   statistics;
//! - [`workbench`]: synthetic data/weight generation, standardization,
//!   accuracy and outlier metrics, and report generation.
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! ```text
//! cargo run --example fixed_point_basics      # fx<W,I> formats and arithmetic
//! cargo run --example calibrate_and_plan      # profile a model, derive fx<16,x>
//! cargo run --example precision_tradeoff      # uniform vs layer-based accuracy
//! cargo run --example guard_bits              # outlier mitigation via guard bits
//! cargo run --example resource_latency_sweep  # reuse-factor design space
//! cargo run --example bridge_transaction      # one memory-mapped transaction
//! cargo run --example latency_distribution    # simulated latency histogram
//! cargo run --example serve_and_replay        # live UDP service + 320 fps replay
//! ```
//!
//! The `deblend` binary exposes the same machinery as a thin CLI
//! (`calibrate`, `plan`, `estimate`, `serve`, `replay`, `report`).

pub mod bridge;
pub mod fxp;
pub mod nn;
pub mod node;
pub mod perf;
pub mod quant;
pub mod workbench;

pub use fxp::{FixedSpec, FixedValue, Overflow, OverflowLog, Rounding};
pub use nn::{Frame, InferenceOutput, Model, ModelDescriptor};
pub use quant::{CalibrationProfile, PrecisionPlan, QuantizedModel};
pub use workbench::Decision;

/// Sensor values per frame: one reading per beam loss monitor.
pub const FRAME_LEN: usize = 260;

/// Output values per frame: one (MI, RR) probability pair per monitor.
pub const OUTPUT_LEN: usize = 520;
