//! Reuse-factor design space: sweep the parallelism knob and watch
//! multipliers trade against cycles, then check the deployed configuration
//! against the 3 ms decision deadline.
//!
//! Run: `cargo run --example resource_latency_sweep`

use deblend::nn::reference_unet;
use deblend::perf::{check_budget, estimate_model, ReuseMap, Schedule};
use deblend::quant::uniform_plan;

fn main() {
    let unet = reference_unet();
    let plan = uniform_plan(&unet, 16, 7).unwrap();

    println!("reuse-factor sweep over the reference U-Net at 100 MHz:\n");
    println!(
        "{:>5} {:>13} {:>13} {:>13} {:>14}",
        "rf", "multipliers", "seq cycles", "seq latency", "dataflow cycles"
    );
    for rf in [1u32, 4, 16, 32, 64, 128, 260, 512] {
        let reuse = ReuseMap::new(rf);
        let seq = estimate_model(&unet, &reuse, &plan, 100e6, Schedule::Sequential);
        let flow = estimate_model(&unet, &reuse, &plan, 100e6, Schedule::Dataflow);
        println!(
            "{:>5} {:>13} {:>13} {:>12.3}ms {:>15}",
            rf,
            seq.total.multipliers,
            seq.total.cycles,
            seq.total.latency_seconds * 1e3,
            flow.total.cycles
        );
    }

    // the deployed knob setting: default 32, dense and sigmoid layers at 260
    let deployed = ReuseMap::new(32)
        .with_override("dense*", 260)
        .with_override("*sigmoid", 260);
    let estimate = estimate_model(&unet, &deployed, &plan, 100e6, Schedule::Sequential);
    println!("\ndeployed reuse map (default 32, dense/sigmoid 260):\n");
    print!("{}", estimate.to_table());

    let budget = check_budget(&estimate, 3e-3);
    println!(
        "\n3 ms deadline: {} (latency {:.3} ms, slack {:.3} ms, ~{:.0} fps)",
        if budget.pass { "PASS" } else { "FAIL" },
        budget.latency_seconds * 1e3,
        budget.slack_seconds * 1e3,
        1.0 / budget.latency_seconds
    );
}
