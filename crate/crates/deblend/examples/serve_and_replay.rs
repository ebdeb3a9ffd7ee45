//! The live service end to end over loopback UDP: start the node with the
//! quantized MLP engine, replay ten seconds of frames at the deployed
//! 320 fps, and print the run statistics.
//!
//! Run: `cargo run --release --example serve_and_replay`

use std::net::UdpSocket;
use std::time::{Duration, Instant};

use deblend::node::{replay_synthetic, Engine, Node, NodeOptions};
use deblend::quant::{quantize_model, uniform_plan};
use deblend::workbench::fixtures::quiet_mlp;
use deblend::workbench::FrameMode;

fn main() {
    let model = quiet_mlp();
    let plan = uniform_plan(&model.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&model, &plan).unwrap();

    // a sink plays the downstream control system receiving the decisions
    let sink = UdpSocket::bind("127.0.0.1:0").unwrap();
    let handle = Node::start(
        Engine::Quantized(qm),
        NodeOptions {
            listen: "127.0.0.1:0".into(),
            emit: sink.local_addr().unwrap().to_string(),
            deadline_ns: 3_000_000,
            queue_capacity: 4,
            standardize: None,
        },
    )
    .unwrap();
    println!("node listening on {}", handle.local_addr());

    let report = replay_synthetic(
        7,
        3_200,
        FrameMode::Standardized,
        320.0,
        &handle.local_addr().to_string(),
    )
    .unwrap();
    println!(
        "replayed {} frames in {:.2} s ({:.1} fps, rate error {:+.3}%)",
        report.sent,
        report.wall_seconds,
        report.achieved_fps,
        report.rate_error * 100.0
    );

    // let the pipeline drain, then collect statistics
    let deadline = Instant::now() + Duration::from_secs(5);
    while handle.counters().processed + handle.counters().dropped < report.sent
        && Instant::now() < deadline
    {
        std::thread::sleep(Duration::from_millis(20));
    }
    let (stats, _records) = handle.shutdown().unwrap();
    print!("{}", stats.summary_lines());

    let ok = stats.received == stats.processed + stats.dropped + stats.malformed;
    println!("accounting exact: {ok}");
}
