//! Guard-bit overflow mitigation: evaluation inputs pushed past the
//! calibration range overflow a guard-0 plan's integer headroom; one guard
//! bit absorbs most of the resulting outliers. Also writes the
//! accuracy-vs-bits and outliers-vs-bits sweep data files.
//!
//! Run: `cargo run --release --example guard_bits`

use deblend::nn::{infer_float, infer_quantized};
use deblend::quant::{plan_precision, profile, quantize_model};
use deblend::workbench::fixtures::{heterogeneous_unet, overflow_eval};
use deblend::workbench::{accuracy_vs_bits, count_outliers};

fn main() {
    let fixture = heterogeneous_unet();
    let prof = profile(&fixture.model, &fixture.calibration).unwrap();
    let hot = overflow_eval(&fixture);

    let mut reference = Vec::new();
    for frame in &hot {
        reference.extend(infer_float(&fixture.model, frame).values);
    }

    println!("evaluation inputs scaled past the calibration range:");
    println!(
        "{:>6} {:>10} {:>18} {:>22}",
        "guard", "outliers", "eval saturations", "calib saturations"
    );
    for guard in 0..=2 {
        let plan = plan_precision(&prof, 16, guard).unwrap();
        let qm = quantize_model(&fixture.model, &plan).unwrap();
        let mut test = Vec::new();
        let mut eval_sat = 0;
        for frame in &hot {
            let out = infer_quantized(&qm, frame);
            eval_sat += out.overflow.total();
            test.extend(out.values);
        }
        let mut calib_sat = 0;
        for frame in &fixture.calibration {
            calib_sat += infer_quantized(&qm, frame).overflow.total();
        }
        let outliers = count_outliers(&reference, &test, 0.20);
        println!("{guard:>6} {outliers:>10} {eval_sat:>18} {calib_sat:>22}");
    }

    // accuracy and outlier counts as total width grows (on-range inputs)
    let sweep = accuracy_vs_bits(
        &fixture.model,
        &fixture.calibration,
        &fixture.eval,
        8..=18,
        0,
    )
    .unwrap();
    let mut acc = String::from("# bits accuracy_mi accuracy_rr\n");
    let mut outliers = String::from("# bits outliers\n");
    println!(
        "\n{:>5} {:>12} {:>12} {:>10}",
        "bits", "acc MI", "acc RR", "outliers"
    );
    for point in &sweep {
        println!(
            "{:>5} {:>11.1}% {:>11.1}% {:>10}",
            point.total_bits,
            point.report.mi_accuracy * 100.0,
            point.report.rr_accuracy * 100.0,
            point.outliers
        );
        acc.push_str(&format!(
            "{} {:.6} {:.6}\n",
            point.total_bits, point.report.mi_accuracy, point.report.rr_accuracy
        ));
        outliers.push_str(&format!("{} {}\n", point.total_bits, point.outliers));
    }
    std::fs::write("accuracy_vs_bits.dat", acc).unwrap();
    std::fs::write("outliers_vs_bits.dat", outliers).unwrap();
    println!("\nwrote accuracy_vs_bits.dat and outliers_vs_bits.dat (gnuplot two-column)");
}
