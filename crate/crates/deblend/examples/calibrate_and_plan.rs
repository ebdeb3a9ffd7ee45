//! Post-training calibration: profile per-layer activation maxima on a
//! calibration set, then derive the per-layer integer-bit allocation and
//! compare it with uniform plans.
//!
//! Run: `cargo run --example calibrate_and_plan`

use deblend::quant::{plan_precision, profile, uniform_plan};
use deblend::workbench::fixtures::heterogeneous_unet;

fn main() {
    let fixture = heterogeneous_unet();
    let prof = profile(&fixture.model, &fixture.calibration).unwrap();

    println!(
        "calibrated {} layers over {} frames",
        prof.max_abs.len(),
        prof.samples
    );

    let layer_based = plan_precision(&prof, 16, 0).unwrap();
    let with_guard = plan_precision(&prof, 16, 1).unwrap();
    let uniform = uniform_plan(&fixture.model.descriptor, 16, 7).unwrap();

    println!(
        "\n{:<18} {:>12} {:>12} {:>12} {:>12}",
        "layer", "max |out|", "fx<16,x>", "guard 1", "uniform"
    );
    for layer in &fixture.model.descriptor.layers {
        let max = prof.get(&layer.name).unwrap();
        println!(
            "{:<18} {:>12.4} {:>12} {:>12} {:>12}",
            layer.name,
            max,
            layer_based.spec_of(&layer.name).unwrap().to_string(),
            with_guard.spec_of(&layer.name).unwrap().to_string(),
            uniform.spec_of(&layer.name).unwrap().to_string(),
        );
    }

    let span = {
        let nonzero: Vec<f64> = prof
            .max_abs
            .values()
            .copied()
            .filter(|&v| v > 0.0)
            .collect();
        let hi = nonzero.iter().cloned().fold(0.0, f64::max);
        let lo = nonzero.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi / lo).log2()
    };
    println!("\nper-layer maxima span {span:.1} octaves; one shared precision cannot fit all");
    println!("\nplan document:\n{}", layer_based.to_json());
}
