//! Fixed-point formats and arithmetic: parse `fx<W,I>` notation, quantize
//! reals onto the grid, watch saturation flags, and account overflows.
//!
//! Run: `cargo run --example fixed_point_basics`

use deblend::fxp::{fx_add, fx_mul, quantize, FixedSpec, OverflowLog};

fn main() {
    let spec: FixedSpec = "fx<16,7>".parse().unwrap();
    println!(
        "{spec}: ulp {} range [{}, {}]",
        spec.ulp(),
        spec.min_value(),
        spec.max_value()
    );

    for x in [0.5, 0.0001, 1.0 / 3.0, 63.9990, 100.0, -100.0] {
        let (v, overflowed) = quantize(x, spec).unwrap();
        println!(
            "quantize({x:>10.6}) -> code {:>6} = {:<12} overflow: {overflowed}",
            v.code,
            v.to_real()
        );
    }

    let a = quantize(60.0, spec).unwrap().0;
    let b = quantize(2.0, spec).unwrap().0;
    let (product, saturated) = fx_mul(a, b, spec);
    println!(
        "60.0 x 2.0 under {spec} -> {} (saturated: {saturated})",
        product.to_real()
    );

    let c = quantize(0.25, spec).unwrap().0;
    let (sum, _) = fx_add(a, c, spec);
    println!("60.0 + 0.25 -> {}", sum.to_real());

    // every arithmetic site can log its overflow events by label
    let mut log = OverflowLog::new();
    for x in [80.0, -70.5, 63.0, 120.0] {
        let (_, overflowed) = quantize(x, spec).unwrap();
        if overflowed {
            log.record("demo_layer");
        }
    }
    println!("overflows at demo_layer: {}", log.count("demo_layer"));

    // a wider format holds what fx<16,7> cannot
    let wide: FixedSpec = "fx<18,10>".parse().unwrap();
    let (v, overflowed) = quantize(100.0, wide).unwrap();
    println!(
        "quantize(100.0) under {wide} -> {} (overflow: {overflowed})",
        v.to_real()
    );
}
