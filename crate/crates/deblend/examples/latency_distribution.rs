//! Simulated end-to-end transaction latency over 10,000 frames with the
//! default timing: the distribution centers on 1.74 ms, rarely exceeds 2 ms,
//! and never reaches the 3 ms deadline. Writes the histogram data file.
//!
//! Run: `cargo run --release --example latency_distribution`

use deblend::bridge::{BridgeState, TimingConfig};
use deblend::node::{stats_report, Engine, LatencyRecord};
use deblend::quant::{quantize_model, uniform_plan};
use deblend::workbench::fixtures::quiet_mlp;
use deblend::workbench::{synth_frames, FrameMode};

fn main() {
    let model = quiet_mlp();
    let plan = uniform_plan(&model.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&model, &plan).unwrap();
    let mut engine = Engine::BridgeSim {
        qm,
        state: Box::new(BridgeState::new(TimingConfig::default())),
    };

    let frames = synth_frames(1234, 10_000, FrameMode::Standardized);
    let records: Vec<LatencyRecord> = frames
        .iter()
        .map(|frame| {
            let (_, simulated_ns) = engine.infer(frame);
            LatencyRecord {
                seq: frame.seq,
                e2e_ns: simulated_ns,
                deadline_met: simulated_ns <= 3_000_000,
                engine_ns: simulated_ns,
            }
        })
        .collect();

    let stats = stats_report(&records, 3_000_000, (records.len() as u64, 0, 0), None).unwrap();
    let s = &stats.engine;
    println!(
        "{} transactions: mean {:.3} ms, p50 {:.3} ms, p99 {:.3} ms, max {:.3} ms",
        s.count,
        s.mean_ns / 1e6,
        s.p50_ns as f64 / 1e6,
        s.p99_ns as f64 / 1e6,
        s.max_ns as f64 / 1e6
    );
    let over_2ms = records.iter().filter(|r| r.engine_ns >= 2_000_000).count();
    println!(
        "beyond 2 ms: {} of {} ({:.2}%), deadline misses: {}",
        over_2ms,
        s.count,
        over_2ms as f64 / s.count as f64 * 100.0,
        s.deadline_miss
    );

    // coarse terminal histogram, 50 us bins
    let peak = s.histogram.iter().map(|(_, c)| *c).max().unwrap_or(1);
    println!("\n{:>9} {:>6}", "ms", "count");
    for (start_ns, count) in &s.histogram {
        if *count == 0 {
            continue;
        }
        let bar = "#".repeat((count * 60 / peak) as usize);
        println!("{:>9.2} {count:>6} {bar}", *start_ns as f64 / 1e6);
    }

    let mut data = String::from("# latency_ms count\n");
    for (start_ns, count) in &s.histogram {
        data.push_str(&format!("{:.3} {}\n", *start_ns as f64 / 1e6, count));
    }
    std::fs::write("latency_hist.dat", data).unwrap();
    println!("\nwrote latency_hist.dat (gnuplot two-column)");
}
