//! Thin command-line front end over the library: calibration, precision
//! planning, resource estimation, the live service, fixed-rate replay, and
//! latency reports. Synthetic model/frame generation is included so the full
//! flow runs without external data.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};

use deblend::nn::{read_weights_file, write_weights_file, Model, ModelDescriptor};
use deblend::node::{records_from_csv, records_to_csv, replay, stats_report, NodeConfig, RunStats};
use deblend::perf::{check_budget, estimate_model, ReuseMap, Schedule};
use deblend::quant::{plan_precision, profile, uniform_plan, PrecisionPlan};
use deblend::workbench::fixtures::heterogeneous_scales;
use deblend::workbench::{
    accuracy_vs_bits, frames_from_csv, frames_to_csv, synth_frames, synth_weights, FrameMode,
    ScaleProfile,
};

#[derive(Parser)]
#[command(
    name = "deblend",
    version,
    about = "Beam-loss de-blending node toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile per-layer activation maxima over a calibration frame set.
    Calibrate(CalibrateArgs),
    /// Derive a per-layer precision plan from a profile, or a uniform plan.
    Plan(PlanArgs),
    /// Estimate resources and latency under a reuse-factor map.
    Estimate(EstimateArgs),
    /// Run the real-time UDP service until SIGINT (or for a fixed duration).
    Serve(ServeArgs),
    /// Send frames at a fixed rate to a service endpoint.
    Replay(ReplayArgs),
    /// Summarize latency records; optionally write plot data files.
    Report(ReportArgs),
    /// Generate synthetic descriptors, weights, and frame sets.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Model descriptor (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Weight file with header line.
    #[arg(long)]
    weights: PathBuf,
    /// Calibration frames (CSV, one frame per row).
    #[arg(long)]
    frames: PathBuf,
    /// Output profile (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// Calibration profile (JSON) for a layer-based plan.
    #[arg(long, conflicts_with = "uniform")]
    profile: Option<PathBuf>,
    /// Total bits shared by every layer.
    #[arg(long, default_value_t = 16)]
    bits: u32,
    /// Guard bits added to every layer's integer part.
    #[arg(long, default_value_t = 0)]
    guard: u32,
    /// Uniform plan "W,I" over the descriptor given by --model.
    #[arg(long)]
    uniform: Option<String>,
    /// Model descriptor (needed with --uniform).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Precision plan (JSON); prices weight storage per layer.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 32)]
    rf_default: u32,
    /// Per-layer reuse overrides, "pattern:rf,pattern:rf" with * wildcards.
    #[arg(long, default_value = "")]
    rf: String,
    /// Clock frequency in Hz.
    #[arg(long, default_value_t = 100e6)]
    clock: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Sequential)]
    schedule: ScheduleArg,
    /// Latency budget in seconds.
    #[arg(long, default_value_t = 3e-3)]
    deadline: f64,
    /// Also write the per-layer table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Sequential,
    Dataflow,
}

#[derive(Args)]
struct ServeArgs {
    /// Node configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Stop after this many seconds instead of waiting for SIGINT.
    #[arg(long)]
    duration: Option<f64>,
    /// Write latency records as CSV on shutdown.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Destination host:port.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 320.0)]
    fps: f64,
    #[arg(long, default_value_t = 3200)]
    count: usize,
    /// Frames CSV to replay; synthetic frames when absent.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Standardized)]
    mode: ModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Standardized,
}

#[derive(Args)]
struct ReportArgs {
    /// Latency records CSV written by serve.
    #[arg(long)]
    records: PathBuf,
    /// Deadline in seconds for miss accounting.
    #[arg(long, default_value_t = 3e-3)]
    deadline: f64,
    /// Prefix for gnuplot-friendly data files: latency histograms, and the
    /// accuracy/outliers-vs-bits sweep when a model is given.
    #[arg(long)]
    plot: Option<String>,
    /// Model descriptor for the accuracy-vs-bits sweep.
    #[arg(long, requires = "plot")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    weights: Option<PathBuf>,
    /// Calibration/evaluation frames CSV for the sweep.
    #[arg(long, requires = "model")]
    frames: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// What to generate.
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Frame count (frames kind).
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Standardized)]
    mode: ModeArg,
    /// Weight scale for every parameterized layer (model kinds); the
    /// heterogeneous fixture profile is used when absent.
    #[arg(long)]
    scale: Option<f64>,
    /// Output path; model kinds write <out>.json and <out>.weights.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Frames,
    UnetModel,
    MlpModel,
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Calibrate(args) => calibrate(args),
        Command::Plan(args) => plan(args),
        Command::Estimate(args) => estimate(args),
        Command::Serve(args) => serve(args),
        Command::Replay(args) => do_replay(args),
        Command::Report(args) => report(args),
        Command::Synth(args) => synth(args),
    }
}

fn load_model(model: &PathBuf, weights: &PathBuf) -> Result<Model, Box<dyn std::error::Error>> {
    let descriptor = ModelDescriptor::from_json(&std::fs::read_to_string(model)?)?;
    let file = std::fs::read(weights)?;
    let payload = read_weights_file(&file)?;
    Ok(Model::load_weights(payload, &descriptor)?)
}

fn calibrate(args: CalibrateArgs) -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&args.model, &args.weights)?;
    let frames = frames_from_csv(&std::fs::read_to_string(&args.frames)?)?;
    let profile = profile(&model, &frames)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&profile)?)?;
    println!(
        "profiled {} layers over {} frames -> {}",
        profile.max_abs.len(),
        profile.samples,
        args.out.display()
    );
    for (layer, max) in &profile.max_abs {
        println!("  {layer:<20} max |out| {max:.6}");
    }
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), Box<dyn std::error::Error>> {
    let plan: PrecisionPlan = match (&args.profile, &args.uniform) {
        (Some(profile_path), None) => {
            let profile = serde_json::from_str(&std::fs::read_to_string(profile_path)?)?;
            plan_precision(&profile, args.bits, args.guard)?
        }
        (None, Some(spec)) => {
            let model_path = args
                .model
                .as_ref()
                .ok_or("--uniform needs --model for the layer list")?;
            let descriptor = ModelDescriptor::from_json(&std::fs::read_to_string(model_path)?)?;
            // accepts both "fx<16,7>" and bare "16,7"
            let parsed: deblend::FixedSpec = if spec.trim().starts_with("fx<") {
                spec.parse()?
            } else {
                format!("fx<{spec}>").parse()?
            };
            uniform_plan(&descriptor, parsed.total_bits, parsed.integer_bits)?
        }
        _ => return Err("pass exactly one of --profile or --uniform".into()),
    };
    std::fs::write(&args.out, plan.to_json())?;
    println!(
        "{:?} plan over {} layers -> {}",
        plan.strategy,
        plan.len(),
        args.out.display()
    );
    for (layer, spec) in plan.layers() {
        println!("  {layer:<20} {spec}");
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Box<dyn std::error::Error>> {
    let descriptor = ModelDescriptor::from_json(&std::fs::read_to_string(&args.model)?)?;
    let plan = PrecisionPlan::from_json(&std::fs::read_to_string(&args.plan)?)?;
    let reuse = ReuseMap::new(args.rf_default).parse_overrides(&args.rf)?;
    let schedule = match args.schedule {
        ScheduleArg::Sequential => Schedule::Sequential,
        ScheduleArg::Dataflow => Schedule::Dataflow,
    };
    let estimate = estimate_model(&descriptor, &reuse, &plan, args.clock, schedule);
    print!("{}", estimate.to_table());
    let budget = check_budget(&estimate, args.deadline);
    println!(
        "deadline {:.3} ms: {} (latency {:.3} ms, slack {:.3} ms)",
        budget.deadline_seconds * 1e3,
        if budget.pass { "PASS" } else { "FAIL" },
        budget.latency_seconds * 1e3,
        budget.slack_seconds * 1e3,
    );
    if let Some(csv) = args.csv {
        std::fs::write(&csv, estimate.to_csv())?;
        println!("per-layer table -> {}", csv.display());
    }
    Ok(())
}

static STOP: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_sig: libc::c_int) {
    STOP.store(true, Ordering::SeqCst);
}

fn serve(args: ServeArgs) -> Result<(), Box<dyn std::error::Error>> {
    let config = NodeConfig::from_json(&std::fs::read_to_string(&args.config)?)?;
    unsafe {
        libc::signal(
            libc::SIGINT,
            on_signal as extern "C" fn(libc::c_int) as libc::sighandler_t,
        );
        libc::signal(
            libc::SIGTERM,
            on_signal as extern "C" fn(libc::c_int) as libc::sighandler_t,
        );
    }
    let stop_at = args
        .duration
        .map(|secs| std::time::Instant::now() + std::time::Duration::from_secs_f64(secs));
    let engine = deblend::node::Engine::from_config(&config)?;
    let handle =
        deblend::node::Node::start(engine, deblend::node::NodeOptions::from_config(&config))?;
    println!(
        "listening on {}, emitting to {}",
        handle.local_addr(),
        config.emit
    );
    loop {
        if STOP.load(Ordering::SeqCst) {
            break;
        }
        if let Some(at) = stop_at {
            if std::time::Instant::now() >= at {
                break;
            }
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let (stats, records) = match handle.shutdown() {
        Ok(ok) => ok,
        Err(deblend::node::NodeError::NoRecords) => {
            println!("no frames processed");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    print_stats(&stats);
    if let Some(path) = args.records {
        std::fs::write(&path, records_to_csv(&records))?;
        println!("records -> {}", path.display());
    }
    Ok(())
}

fn print_stats(stats: &RunStats) {
    print!("{}", stats.summary_lines());
}

fn do_replay(args: ReplayArgs) -> Result<(), Box<dyn std::error::Error>> {
    let frames = match &args.frames {
        Some(path) => frames_from_csv(&std::fs::read_to_string(path)?)?,
        None => synth_frames(
            args.seed,
            args.count,
            match args.mode {
                ModeArg::Raw => FrameMode::Raw,
                ModeArg::Standardized => FrameMode::Standardized,
            },
        ),
    };
    let frames = &frames[..frames.len().min(args.count)];
    let report = replay(frames, args.fps, &args.target)?;
    println!(
        "sent {} frames in {:.3} s: {:.1} fps against target {:.1} (rate error {:+.3}%)",
        report.sent,
        report.wall_seconds,
        report.achieved_fps,
        report.target_fps,
        report.rate_error * 100.0
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Box<dyn std::error::Error>> {
    let records = records_from_csv(&std::fs::read_to_string(&args.records)?)?;
    let deadline_ns = (args.deadline * 1e9) as u64;
    let received = records.len() as u64;
    let stats = stats_report(&records, deadline_ns, (received, 0, 0), None)?;
    print_stats(&stats);

    if let Some(prefix) = &args.plot {
        write_histogram(&format!("{prefix}_e2e_hist.dat"), &stats.e2e.histogram)?;
        write_histogram(
            &format!("{prefix}_engine_hist.dat"),
            &stats.engine.histogram,
        )?;
        println!("latency histograms -> {prefix}_e2e_hist.dat, {prefix}_engine_hist.dat");

        if let (Some(model), Some(weights), Some(frames_path)) =
            (&args.model, &args.weights, &args.frames)
        {
            let model = load_model(model, weights)?;
            let frames = frames_from_csv(&std::fs::read_to_string(frames_path)?)?;
            let half = frames.len() / 2;
            let sweep = accuracy_vs_bits(&model, &frames[..half], &frames[half..], 8..=18, 0)?;
            let mut acc = String::from("# bits accuracy_mi accuracy_rr\n");
            let mut outliers = String::from("# bits outliers\n");
            for point in &sweep {
                acc.push_str(&format!(
                    "{} {:.6} {:.6}\n",
                    point.total_bits, point.report.mi_accuracy, point.report.rr_accuracy
                ));
                outliers.push_str(&format!("{} {}\n", point.total_bits, point.outliers));
            }
            std::fs::write(format!("{prefix}_accuracy_vs_bits.dat"), acc)?;
            std::fs::write(format!("{prefix}_outliers_vs_bits.dat"), outliers)?;
            println!(
                "accuracy sweep -> {prefix}_accuracy_vs_bits.dat, {prefix}_outliers_vs_bits.dat"
            );
        }
    }
    Ok(())
}

fn write_histogram(path: &str, bins: &[(u64, u64)]) -> std::io::Result<()> {
    let mut out = String::from("# latency_ms count\n");
    for (start_ns, count) in bins {
        out.push_str(&format!("{:.3} {}\n", *start_ns as f64 / 1e6, count));
    }
    std::fs::write(path, out)
}

fn synth(args: SynthArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mode = match args.mode {
        ModeArg::Raw => FrameMode::Raw,
        ModeArg::Standardized => FrameMode::Standardized,
    };
    match args.kind {
        SynthKind::Frames => {
            let frames = synth_frames(args.seed, args.count, mode);
            std::fs::write(&args.out, frames_to_csv(&frames))?;
            println!("{} frames -> {}", frames.len(), args.out.display());
        }
        SynthKind::UnetModel | SynthKind::MlpModel => {
            let descriptor = match args.kind {
                SynthKind::UnetModel => deblend::nn::reference_unet(),
                _ => deblend::nn::reference_mlp(),
            };
            let scales = match args.scale {
                Some(s) => ScaleProfile::uniform(&descriptor, s),
                None => match args.kind {
                    SynthKind::UnetModel => heterogeneous_scales(),
                    _ => ScaleProfile::uniform(&descriptor, 0.05),
                },
            };
            let payload = synth_weights(args.seed, &descriptor, &scales)?;
            let json_path = args.out.with_extension("json");
            let weights_path = args.out.with_extension("weights");
            std::fs::write(&json_path, descriptor.to_json())?;
            std::fs::write(&weights_path, write_weights_file(&payload))?;
            println!(
                "{} ({} parameters) -> {}, {}",
                descriptor.name,
                descriptor.parameters,
                json_path.display(),
                weights_path.display()
            );
        }
    }
    Ok(())
}
