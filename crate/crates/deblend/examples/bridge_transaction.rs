//! One memory-mapped bridge transaction, step by step: pack the frame into
//! the 16-bit input RAM through the 32-bit host port, trigger, run the IP,
//! read the output RAM back, then verify the result is bit-identical to
//! direct quantized inference.
//!
//! Run: `cargo run --example bridge_transaction`

use deblend::bridge::{pack_inputs, run_transaction, BridgeState, TimingConfig};
use deblend::nn::infer_quantized;
use deblend::quant::{quantize_model, uniform_plan};
use deblend::workbench::fixtures::quiet_mlp;
use deblend::workbench::{synth_frames, FrameMode};

fn main() {
    let model = quiet_mlp();
    let plan = uniform_plan(&model.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&model, &plan).unwrap();
    let frame = synth_frames(7, 1, FrameMode::Standardized).pop().unwrap();

    // the packing that step 1 performs: two 16-bit codes per 32-bit word
    let spec = plan.spec_of("dense1").unwrap();
    let (words, _) = pack_inputs(&frame.values()[..4], spec).unwrap();
    println!("first four sensor values pack into host words:");
    for (i, word) in words.iter().enumerate() {
        println!("  word[{i}] = {word:#010x}");
    }

    let mut state = BridgeState::new(TimingConfig::default());
    let (output, trace) = run_transaction(&mut state, &frame, &qm).unwrap();

    println!("\ntransaction trace:");
    println!(
        "{:>5} {:<12} {:>12} {:>12} {:>12}  payload",
        "step", "label", "start ns", "end ns", "ns"
    );
    for event in &trace.events {
        println!(
            "{:>5} {:<12} {:>12} {:>12} {:>12}  {}",
            event.step as u8,
            format!("{:?}", event.step),
            event.t_start_ns,
            event.t_end_ns,
            event.t_end_ns - event.t_start_ns,
            event.payload
        );
    }
    println!(
        "total {:.4} ms, decision {}",
        trace.total_latency_ns as f64 / 1e6,
        output.decision
    );

    let direct = infer_quantized(&qm, &frame);
    println!(
        "bridge output equals direct fixed-point inference: {}",
        output.values == direct.values
    );

    println!("\ntrace CSV:\n{}", trace.to_csv());
}
