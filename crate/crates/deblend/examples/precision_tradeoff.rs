//! The precision-customization trade-off: uniform fx<18,10> is accurate but
//! pays for 18-bit weights everywhere; uniform fx<16,7> collapses once inner
//! layers outrun its range; layer-based fx<16,x> keeps 16-bit storage and
//! the accuracy.
//!
//! Run: `cargo run --release --example precision_tradeoff`

use deblend::workbench::fixtures::heterogeneous_unet;
use deblend::workbench::table2_report;

fn main() {
    let fixture = heterogeneous_unet();
    println!(
        "model {} ({} parameters), {} calibration / {} evaluation frames\n",
        fixture.model.descriptor.name,
        fixture.model.descriptor.parameters,
        fixture.calibration.len(),
        fixture.eval.len()
    );
    let report = table2_report(&fixture.model, &fixture.calibration, &fixture.eval).unwrap();
    print!("{report}");

    std::fs::write("precision_tradeoff.csv", report.to_csv()).unwrap();
    println!("\nwrote precision_tradeoff.csv");
}
