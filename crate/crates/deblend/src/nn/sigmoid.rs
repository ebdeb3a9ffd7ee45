//! Table-based sigmoid for the quantized path: a piecewise-constant lookup
//! over [-8, 8) with 1024 entries, the standard HLS realization of the
//! activation. Inputs outside the table range clamp to 0 or 1 - ulp.

use crate::fxp::{quantize, FixedSpec};

pub const SIGMOID_TABLE_ENTRIES: usize = 1024;
pub const SIGMOID_RANGE: f64 = 8.0;

/// Bucket width is 16/1024 = 2^-6, so bucket lookup is a pure shift of the
/// input code.
const BUCKET_FRAC_BITS: i32 = 6;

#[derive(Debug, Clone)]
pub struct SigmoidTable {
    codes: Vec<i64>,
    out_spec: FixedSpec,
}

impl SigmoidTable {
    /// Builds the table for a given output spec. Entries sample the bucket
    /// center, quantized to the output grid and capped at 1 - ulp so the
    /// table stays monotone up to the high clamp.
    pub fn new(out_spec: FixedSpec) -> Self {
        let step = 2.0 * SIGMOID_RANGE / SIGMOID_TABLE_ENTRIES as f64;
        let one_minus_ulp = (1i64 << out_spec.frac_bits()) - 1;
        let codes = (0..SIGMOID_TABLE_ENTRIES)
            .map(|i| {
                let center = -SIGMOID_RANGE + (i as f64 + 0.5) * step;
                let y = super::float::sigmoid(center);
                let (v, _) = quantize(y, out_spec).expect("sigmoid output is finite");
                v.code.clamp(0, one_minus_ulp)
            })
            .collect();
        Self { codes, out_spec }
    }

    pub fn out_spec(&self) -> FixedSpec {
        self.out_spec
    }

    /// Looks up the sigmoid of a code under `in_spec`, returning a code under
    /// the table's output spec.
    pub fn lookup(&self, code: i64, in_spec: FixedSpec) -> i64 {
        let f = in_spec.frac_bits() as i32;
        // floor(value * 64): value = code * 2^-f, bucket grid is 2^-6.
        let scaled = if f >= BUCKET_FRAC_BITS {
            code >> (f - BUCKET_FRAC_BITS)
        } else {
            code << (BUCKET_FRAC_BITS - f)
        };
        let idx = scaled + (SIGMOID_TABLE_ENTRIES as i64 / 2);
        if idx < 0 {
            0
        } else if idx >= SIGMOID_TABLE_ENTRIES as i64 {
            (1i64 << self.out_spec.frac_bits()) - 1
        } else {
            self.codes[idx as usize]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fxp::FixedValue;

    fn spec16_7() -> FixedSpec {
        FixedSpec::saturating(16, 7).unwrap()
    }

    #[test]
    fn zero_maps_near_half() {
        let t = SigmoidTable::new(spec16_7());
        let code = t.lookup(0, spec16_7());
        let v = code as f64 * spec16_7().ulp();
        // within one table step of 0.5
        assert!(
            (v - 0.5).abs()
                <= 2.0 * SIGMOID_RANGE / SIGMOID_TABLE_ENTRIES as f64 * 0.25 + spec16_7().ulp()
        );
    }

    #[test]
    fn clamps_beyond_range() {
        let s = spec16_7();
        let t = SigmoidTable::new(s);
        let hi = FixedValue::from_code(s.max_code(), s).unwrap();
        let lo = FixedValue::from_code(s.min_code(), s).unwrap();
        let one_minus_ulp = (1i64 << s.frac_bits()) - 1;
        assert_eq!(t.lookup(hi.code, s), one_minus_ulp);
        assert_eq!(t.lookup(lo.code, s), 0);
        // exactly +8 is already past the last bucket
        let at_eight = quantize(8.0, s).unwrap().0;
        assert_eq!(t.lookup(at_eight.code, s), one_minus_ulp);
    }

    #[test]
    fn monotone_over_all_16_bit_codes() {
        let s = spec16_7();
        let t = SigmoidTable::new(s);
        let mut prev = i64::MIN;
        for code in s.min_code()..=s.max_code() {
            let y = t.lookup(code, s);
            assert!(y >= prev, "non-monotone at code {code}: {y} < {prev}");
            prev = y;
        }
    }
}
