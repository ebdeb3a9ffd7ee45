//! Frozen synthetic fixtures.
//!
//! The heterogeneous fixture is a reference U-Net whose per-layer weight
//! scales are tuned so the calibration maxima span more than six octaves and
//! sit where the precision strategies genuinely diverge: two decoder layers
//! run well past the uniform fx<16,7> range (64) while everything stays
//! inside fx<18,10>'s range (512), and every weight scale clears each plan's
//! ulp, so range rather than weight precision is what separates the
//! strategies.
//! The overflow evaluation set drives the same model with inputs scaled
//! beyond the calibration range, the regime guard bits exist for.
//!
//! All seeds are frozen; fixtures are byte-reproducible.

use super::synth::{synth_frames, synth_weights, FrameMode, ScaleProfile};
use crate::nn::{reference_mlp, reference_unet, Frame, Model};

pub const UNET_WEIGHT_SEED: u64 = 425;
pub const CALIBRATION_SEED: u64 = 402;
pub const EVAL_SEED: u64 = 403;
pub const CALIBRATION_FRAMES: usize = 200;
pub const EVAL_FRAMES: usize = 100;
/// Input scale factor of the overflow evaluation set, chosen to exhaust the
/// guard-0 range headroom (below 2x) of every layer at once.
pub const OVERFLOW_SCALE: f64 = 2.5;

pub struct UnetFixture {
    pub model: Model,
    pub calibration: Vec<Frame>,
    pub eval: Vec<Frame>,
}

/// Per-layer weight scales of the heterogeneous U-Net fixture.
pub fn heterogeneous_scales() -> ScaleProfile {
    ScaleProfile::new()
        .with("enc1_conv", 1.2)
        .with("enc2_conv", 1.4)
        .with("bottleneck_conv", 0.06)
        .with("dec1_conv", 0.2)
        .with("dec2_conv", 0.12)
        .with("head_conv", 0.05)
}

/// The heterogeneous U-Net fixture with its calibration and evaluation
/// frame sets (standardized inputs).
pub fn heterogeneous_unet() -> UnetFixture {
    let descriptor = reference_unet();
    let bytes = synth_weights(UNET_WEIGHT_SEED, &descriptor, &heterogeneous_scales())
        .expect("profile covers the reference graph");
    UnetFixture {
        model: Model::load_weights(&bytes, &descriptor).expect("sizes match"),
        calibration: synth_frames(
            CALIBRATION_SEED,
            CALIBRATION_FRAMES,
            FrameMode::Standardized,
        ),
        eval: synth_frames(EVAL_SEED, EVAL_FRAMES, FrameMode::Standardized),
    }
}

/// Evaluation frames scaled past the calibration range, inducing overflows
/// under a guard-0 plan.
pub fn overflow_eval(fixture: &UnetFixture) -> Vec<Frame> {
    fixture
        .eval
        .iter()
        .map(|f| {
            f.map(|v| v * OVERFLOW_SCALE)
                .expect("scaled values stay finite")
        })
        .collect()
}

pub const MLP_WEIGHT_SEED: u64 = 21;

/// Small-weight reference MLP used by the bridge and service tests; its
/// activations sit comfortably inside fx<16,7>.
pub fn quiet_mlp() -> Model {
    let descriptor = reference_mlp();
    let bytes = synth_weights(
        MLP_WEIGHT_SEED,
        &descriptor,
        &ScaleProfile::uniform(&descriptor, 0.05),
    )
    .expect("profile covers the reference graph");
    Model::load_weights(&bytes, &descriptor).expect("sizes match")
}
