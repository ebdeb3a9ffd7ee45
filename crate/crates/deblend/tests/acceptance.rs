//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured figures (run with `--nocapture` to see them). Timing-bound
//! criteria serialize on a shared lock so wall-clock measurements do not
//! overlap.
//!
//! Criteria:
//! 1. fixed-point round-trip and saturation soundness vs a big-rational oracle
//! 2. bridge transactions bit-identical to direct quantized inference
//! 3. layer-based fx<16,x> beats uniform fx<16,7>, within 2pp of fx<18,10>
//! 4. guard bits strictly reduce outliers; calibration stays saturation-free
//! 5. reuse-factor monotonicity, exact multiplier counts, latency sanity band
//! 6. 320 fps replay served with zero drops and exact accounting
//! 7. simulated latency distribution centered on 1.74 ms, >99% under 2 ms
//! 8. throughput identity: fps = frames / wall time

use std::net::UdpSocket;
use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::{Duration, Instant};

use deblend::bridge::{run_transaction, BridgeState, TimingConfig};
use deblend::fxp::{quantize, FixedSpec, Overflow, Rounding};
use deblend::nn::{infer_float, infer_quantized, reference_mlp, reference_unet};
use deblend::node::{replay_synthetic, stats_report, Engine, LatencyRecord, Node, NodeOptions};
use deblend::perf::{
    check_budget, estimate_layer, estimate_model, layer_costs, ReuseMap, Schedule,
};
use deblend::quant::{plan_precision, profile, quantize_model, uniform_plan};
use deblend::workbench::fixtures::{heterogeneous_unet, overflow_eval, quiet_mlp};
use deblend::workbench::{count_outliers, table2_report, FrameMode};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive};

// The wall-clock criteria need a quiet machine and the compute-heavy ones
// are exactly what perturbs them, so every criterion runs serialized. A
// failed criterion must not poison the rest.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(PoisonError::into_inner)
}

fn pass(criterion: u32, name: &str, details: &str) {
    println!("ACCEPTANCE {criterion} ({name}): PASS | {details}");
}

/// Independent arbitrary-precision quantizer used to pin saturation bounds.
fn oracle_quantize_code(x: &BigRational, spec: FixedSpec) -> i64 {
    let two = BigInt::from(2);
    let scale = BigRational::from_integer(two.pow(spec.frac_bits()));
    let lo = BigInt::from(spec.min_code());
    let hi = BigInt::from(spec.max_code());
    let scaled = x * &scale;
    let floor = scaled.floor().to_integer();
    let frac = &scaled - BigRational::from_integer(floor.clone());
    let half = BigRational::new(BigInt::one(), two.clone());
    let code = match spec.rounding {
        Rounding::Truncate => floor,
        Rounding::NearestEven => {
            if frac > half || (frac == half && (&floor % 2i32).abs() == BigInt::one()) {
                floor + 1
            } else {
                floor
            }
        }
    };
    let code = match spec.overflow {
        Overflow::Saturate => code.clamp(lo, hi),
        Overflow::Wrap => {
            let modulus = two.pow(spec.total_bits);
            let mut low = code % &modulus;
            if low.sign() == num::bigint::Sign::Minus {
                low += &modulus;
            }
            if low >= two.pow(spec.total_bits - 1) {
                low -= modulus;
            }
            low
        }
    };
    code.to_i64().expect("code fits i64")
}

fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn acceptance_specs() -> Vec<FixedSpec> {
    let mut specs = vec![
        FixedSpec::saturating(16, 7).unwrap(),
        FixedSpec::saturating(18, 10).unwrap(),
    ];
    for i in 1..=15 {
        specs.push(FixedSpec::saturating(16, i).unwrap());
    }
    specs
}

#[test]
fn criterion_1_fixed_point_soundness() {
    let _serial = serial();
    use rand::{Rng, SeedableRng};
    let started = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACC1);
    let specs = acceptance_specs();
    for spec in &specs {
        let (lo, hi) = (spec.min_value(), spec.max_value());
        for _ in 0..1_000_000 {
            let x = rng.random_range(lo..=hi);
            let (q, overflowed) = quantize(x, *spec).unwrap();
            let err = (q.to_real() - x).abs();
            assert!(
                err <= spec.ulp() / 2.0,
                "{spec}: round-trip error {err} for {x}"
            );
            assert!(!overflowed, "{spec}: in-range {x} flagged");
        }
        // saturation bounds, bit-exact against the big-rational oracle
        let ulp = spec.ulp();
        for x in [
            hi,
            hi + ulp / 3.0,
            hi + 0.6 * ulp,
            hi + 5.0 * ulp,
            1e12,
            lo,
            lo - ulp / 3.0,
            lo - 0.6 * ulp,
            lo - 5.0 * ulp,
            -1e12,
        ] {
            let (q, _) = quantize(x, *spec).unwrap();
            let expect = oracle_quantize_code(&rational_from_f64(x), *spec);
            assert_eq!(q.code, expect, "{spec}: saturation bound at {x}");
        }
        assert_eq!(quantize(hi, *spec).unwrap().0.code, spec.max_code());
        assert_eq!(quantize(lo, *spec).unwrap().0.code, spec.min_code());
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        1,
        "fixed-point soundness",
        &format!(
            "{} specs x 1e6 round-trips <= ulp/2, saturation bounds oracle-exact, {:.1?}",
            specs.len(),
            elapsed
        ),
    );
}

#[test]
fn criterion_2_bridge_oracle_equivalence() {
    let _serial = serial();
    let started = Instant::now();
    let fixture = heterogeneous_unet();
    let unet_plan = plan_precision(
        &profile(&fixture.model, &fixture.calibration).unwrap(),
        16,
        0,
    )
    .unwrap();
    let unet_qm = quantize_model(&fixture.model, &unet_plan).unwrap();

    let mlp = quiet_mlp();
    let mlp_plan = uniform_plan(&mlp.descriptor, 16, 7).unwrap();
    let mlp_qm = quantize_model(&mlp, &mlp_plan).unwrap();

    let frames = deblend::workbench::synth_frames(0xACC2, 1_000, FrameMode::Standardized);
    for (label, qm) in [("mlp", &mlp_qm), ("unet", &unet_qm)] {
        let mut state = BridgeState::new(TimingConfig::default());
        for frame in &frames {
            let (out, _) = run_transaction(&mut state, frame, qm).unwrap();
            let direct = infer_quantized(qm, frame);
            assert_eq!(
                out.values, direct.values,
                "{label} diverged at frame {}",
                frame.seq
            );
            assert_eq!(
                out.decision, direct.decision,
                "{label} decision at frame {}",
                frame.seq
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass(
        2,
        "bridge oracle equivalence",
        &format!("1000 frames x 2 models bit-identical, {elapsed:.1?}"),
    );
}

#[test]
fn criterion_3_quantization_ordering() {
    let _serial = serial();
    let fixture = heterogeneous_unet();
    let prof = profile(&fixture.model, &fixture.calibration).unwrap();
    let nonzero: Vec<f64> = prof
        .max_abs
        .values()
        .copied()
        .filter(|&v| v > 0.0)
        .collect();
    let span = (nonzero.iter().cloned().fold(0.0, f64::max)
        / nonzero.iter().cloned().fold(f64::INFINITY, f64::min))
    .log2();
    assert!(span >= 6.0, "fixture spans only {span:.2} octaves");

    let report = table2_report(&fixture.model, &fixture.calibration, &fixture.eval).unwrap();
    let layered = &report.row("layer-based fx<16,x>").report;
    let uniform16 = &report.row("uniform fx<16,7>").report;
    let uniform18 = &report.row("uniform fx<18,10>").report;

    assert!(
        layered.mi_accuracy > uniform16.mi_accuracy,
        "MI: layer-based {} vs uniform<16,7> {}",
        layered.mi_accuracy,
        uniform16.mi_accuracy
    );
    assert!(
        layered.rr_accuracy > uniform16.rr_accuracy,
        "RR: layer-based {} vs uniform<16,7> {}",
        layered.rr_accuracy,
        uniform16.rr_accuracy
    );
    assert!(layered.mi_accuracy >= 0.95 && layered.rr_accuracy >= 0.95);
    assert!(uniform18.mi_accuracy >= layered.mi_accuracy - 0.02);
    assert!(uniform18.rr_accuracy >= layered.rr_accuracy - 0.02);
    pass(
        3,
        "quantization ordering",
        &format!(
            "16,x MI {:.1}%/RR {:.1}% > 16,7 MI {:.1}%/RR {:.1}%; 18,10 MI {:.1}%/RR {:.1}%; span {span:.1} octaves",
            layered.mi_accuracy * 100.0,
            layered.rr_accuracy * 100.0,
            uniform16.mi_accuracy * 100.0,
            uniform16.rr_accuracy * 100.0,
            uniform18.mi_accuracy * 100.0,
            uniform18.rr_accuracy * 100.0,
        ),
    );
}

#[test]
fn criterion_4_guard_bit_mitigation() {
    let _serial = serial();
    let fixture = heterogeneous_unet();
    let prof = profile(&fixture.model, &fixture.calibration).unwrap();
    let hot = overflow_eval(&fixture);

    let mut reference = Vec::new();
    for frame in &hot {
        reference.extend(infer_float(&fixture.model, frame).values);
    }
    let mut outliers = Vec::new();
    for guard in [0u32, 1] {
        let plan = plan_precision(&prof, 16, guard).unwrap();
        let qm = quantize_model(&fixture.model, &plan).unwrap();
        let mut test = Vec::new();
        for frame in &hot {
            test.extend(infer_quantized(&qm, frame).values);
        }
        outliers.push(count_outliers(&reference, &test, 0.20));
    }
    assert!(
        outliers[1] < outliers[0],
        "guard 1 outliers {} not below guard 0 {}",
        outliers[1],
        outliers[0]
    );

    // sufficiency: guard >= 1 leaves the calibration set saturation-free
    let plan = plan_precision(&prof, 16, 1).unwrap();
    let qm = quantize_model(&fixture.model, &plan).unwrap();
    let mut calibration_saturations = 0u64;
    for frame in &fixture.calibration {
        calibration_saturations += infer_quantized(&qm, frame).overflow.total();
    }
    assert_eq!(
        calibration_saturations, 0,
        "calibration saturations at guard 1"
    );
    pass(
        4,
        "guard-bit mitigation",
        &format!(
            "outliers guard0 {} -> guard1 {}; calibration saturations at guard1: 0",
            outliers[0], outliers[1]
        ),
    );
}

#[test]
fn criterion_5_reuse_factor_model() {
    let _serial = serial();
    let unet = reference_unet();
    for cost in layer_costs(&unet) {
        let mut prev_cycles = 0u64;
        let mut prev_mults = u64::MAX;
        for rf in [1u32, 2, 4, 8, 16, 32, 64, 128, 256, 512] {
            let est = estimate_layer(&cost, rf, 16, 100e6);
            assert!(est.cycles >= prev_cycles, "{} cycles at rf {rf}", cost.name);
            assert!(
                est.multipliers <= prev_mults,
                "{} multipliers at rf {rf}",
                cost.name
            );
            assert!(
                est.multipliers * rf as u64 >= cost.mult_count,
                "{} capacity at rf {rf}",
                cost.name
            );
            prev_cycles = est.cycles;
            prev_mults = est.multipliers;
        }
    }

    // Dense 260 -> 128 at rf = 32 deploys exactly 1,040 multipliers.
    let mlp = reference_mlp();
    let dense1 = &layer_costs(&mlp)[0];
    assert_eq!(dense1.mult_count, 33_280);
    assert_eq!(estimate_layer(dense1, 32, 16, 100e6).multipliers, 1_040);

    // Deployed reuse map at 100 MHz lands inside the sanity band.
    let reuse = ReuseMap::new(32)
        .with_override("dense*", 260)
        .with_override("*sigmoid", 260);
    let plan = uniform_plan(&unet, 16, 7).unwrap();
    let est = estimate_model(&unet, &reuse, &plan, 100e6, Schedule::Sequential);
    let latency = est.total.latency_seconds;
    assert!(
        (0.157e-3..=15.7e-3).contains(&latency),
        "latency {latency} outside sanity band"
    );
    let budget = check_budget(&est, 3e-3);
    pass(
        5,
        "reuse-factor model",
        &format!(
            "monotone over rf 1..512; dense rf32 = 1040 multipliers; latency {:.3} ms in [0.157, 15.7], 3 ms budget pass={}",
            latency * 1e3,
            budget.pass
        ),
    );
}

#[test]
fn criterion_6_real_time_service() {
    let _serial = serial();
    let started = Instant::now();

    let mlp = quiet_mlp();
    let plan = uniform_plan(&mlp.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&mlp, &plan).unwrap();

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
    let target = handle.local_addr().to_string();

    let report = replay_synthetic(7, 3_200, FrameMode::Standardized, 320.0, &target).unwrap();
    assert_eq!(report.sent, 3_200);
    // 3,200 frames at 320 fps is a 10 s schedule, within one percent
    assert!(
        (report.wall_seconds - 3_199.0 / 320.0).abs() / 10.0 < 0.01,
        "replay took {:.3} s",
        report.wall_seconds
    );

    // allow the pipeline to drain before shutdown
    let deadline = Instant::now() + Duration::from_secs(5);
    while handle.counters().processed + handle.counters().dropped + handle.counters().malformed
        < 3_200
        && Instant::now() < deadline
    {
        std::thread::sleep(Duration::from_millis(20));
    }
    let (stats, _records) = handle.shutdown().unwrap();

    assert_eq!(stats.received, 3_200, "datagrams received");
    assert_eq!(stats.dropped, 0, "drops");
    assert_eq!(
        stats.received,
        stats.processed + stats.dropped + stats.malformed,
        "accounting"
    );
    let p99_ms = stats.e2e.p99_ns as f64 / 1e6;
    let deadline_line = if p99_ms < 3.0 {
        format!("p99 {p99_ms:.3} ms < 3 ms target: met")
    } else {
        format!("p99 {p99_ms:.3} ms vs 3 ms target: MISSED on this host (reported, not fatal)")
    };
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        6,
        "real-time service",
        &format!(
            "3200 received, 0 dropped, accounting exact ({} = {} + {} + {}); {deadline_line}; {:.1?}",
            stats.received, stats.processed, stats.dropped, stats.malformed, elapsed
        ),
    );
}

#[test]
fn criterion_7_latency_distribution() {
    let _serial = serial();
    let started = Instant::now();

    let mlp = quiet_mlp();
    let plan = uniform_plan(&mlp.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&mlp, &plan).unwrap();
    let mut engine = Engine::BridgeSim {
        qm,
        state: Box::new(BridgeState::new(TimingConfig::default())),
    };

    let frames = deblend::workbench::synth_frames(0xACC7, 10_000, FrameMode::Standardized);
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
    let stats = stats_report(&records, 3_000_000, (10_000, 0, 0), None).unwrap();

    let mean_ms = stats.engine.mean_ns / 1e6;
    assert!(
        (mean_ms - 1.74).abs() <= 0.1,
        "mean {mean_ms:.4} ms outside 1.74 +/- 0.1"
    );
    let below_2ms =
        records.iter().filter(|r| r.engine_ns < 2_000_000).count() as f64 / records.len() as f64;
    assert!(below_2ms > 0.99, "only {below_2ms:.4} below 2 ms");
    let mode_ms = stats.engine.mode_bin_ns() as f64 / 1e6;
    assert!(
        (1.55..=1.90).contains(&mode_ms),
        "histogram mode bin at {mode_ms:.2} ms not near 1.74"
    );
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass(
        7,
        "latency distribution",
        &format!(
            "mean {mean_ms:.3} ms, {:.2}% below 2 ms, mode bin {mode_ms:.2} ms, {elapsed:.1?}",
            below_2ms * 100.0
        ),
    );
}

#[test]
fn criterion_8_throughput_identity() {
    let _serial = serial();

    // arithmetic identity: 1.74 ms per frame is ~575 fps
    let fps_at_deployed_latency: f64 = 1.0 / 1.74e-3;
    assert!((fps_at_deployed_latency - 574.7126).abs() < 1e-3);
    assert_eq!(fps_at_deployed_latency.round() as u64, 575);

    // achieved fps in the stats equals frames / wall time within 2%
    let mlp = quiet_mlp();
    let plan = uniform_plan(&mlp.descriptor, 16, 7).unwrap();
    let qm = quantize_model(&mlp, &plan).unwrap();
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
    // external stopwatch opened at the same instant as the node's own
    let external_started = Instant::now();
    let target = handle.local_addr().to_string();
    replay_synthetic(9, 640, FrameMode::Standardized, 320.0, &target).unwrap();
    let drain_deadline = Instant::now() + Duration::from_secs(5);
    while handle.counters().processed < 640 && Instant::now() < drain_deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    let (stats, _) = handle.shutdown().unwrap();
    let external_wall = external_started.elapsed().as_secs_f64();

    let reported = stats.achieved_fps.expect("wall time known");
    let external_fps = stats.processed as f64 / external_wall;
    assert!(
        (reported - external_fps).abs() / external_fps < 0.02,
        "reported {reported:.1} fps vs externally measured {external_fps:.1} fps"
    );
    pass(
        8,
        "throughput identity",
        &format!(
            "1/1.74 ms = {fps_at_deployed_latency:.1} fps (~575); reported {reported:.1} fps vs external {external_fps:.1} fps"
        ),
    );
}
