//! Bit-exact signed fixed-point arithmetic with saturation, rounding, and
//! overflow accounting.
//!
//! A [`FixedSpec`] describes a two's-complement format with `W` total bits and
//! `I` integer bits, where `I` counts the sign bit. `fx<16,7>` therefore has
//! 9 fraction bits, a ulp of 2^-9, and covers `[-64, 64)`. All operations are
//! exact integer arithmetic on the underlying codes; no intermediate result is
//! ever rounded through floating point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FxpError {
    #[error("bad fixed-point spec fx<{total_bits},{integer_bits}>: {reason}")]
    BadSpec {
        total_bits: u32,
        integer_bits: u32,
        reason: &'static str,
    },
    #[error("non-finite value cannot be quantized")]
    NonFinite,
    #[error("cannot parse {0:?} as a fixed-point spec (expected \"fx<W,I>\")")]
    ParseSpec(String),
}

/// How a result is rounded onto the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    /// Round to nearest; ties go to the even code.
    NearestEven,
    /// Drop fraction bits (rounds toward negative infinity), as a plain
    /// bit-truncation in hardware does.
    Truncate,
}

/// What happens when a result exceeds the representable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Overflow {
    /// Clamp to the nearest range endpoint.
    Saturate,
    /// Keep the low `W` bits of the code (two's-complement wrap).
    Wrap,
}

/// Signed fixed-point format: `W` total bits, `I` integer bits (sign included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedSpec {
    pub total_bits: u32,
    pub integer_bits: u32,
    pub rounding: Rounding,
    pub overflow: Overflow,
}

pub const MIN_TOTAL_BITS: u32 = 4;
pub const MAX_TOTAL_BITS: u32 = 32;

impl FixedSpec {
    pub fn new(
        total_bits: u32,
        integer_bits: u32,
        rounding: Rounding,
        overflow: Overflow,
    ) -> Result<Self, FxpError> {
        let bad = |reason| FxpError::BadSpec {
            total_bits,
            integer_bits,
            reason,
        };
        if total_bits < MIN_TOTAL_BITS {
            return Err(bad("total bits below 4"));
        }
        if total_bits > MAX_TOTAL_BITS {
            return Err(bad("total bits above 32"));
        }
        if integer_bits < 1 {
            return Err(bad("integer bits below 1"));
        }
        if integer_bits > total_bits {
            return Err(bad("integer bits exceed total bits"));
        }
        Ok(Self {
            total_bits,
            integer_bits,
            rounding,
            overflow,
        })
    }

    /// Default-mode spec: nearest-even rounding, saturating overflow.
    pub fn saturating(total_bits: u32, integer_bits: u32) -> Result<Self, FxpError> {
        Self::new(
            total_bits,
            integer_bits,
            Rounding::NearestEven,
            Overflow::Saturate,
        )
    }

    pub fn frac_bits(&self) -> u32 {
        self.total_bits - self.integer_bits
    }

    /// Weight of one code step: 2^-(W-I). Exact.
    pub fn ulp(&self) -> f64 {
        1.0 / (1u64 << self.frac_bits()) as f64
    }

    /// Largest representable code: 2^(W-1) - 1.
    pub fn max_code(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Smallest representable code: -2^(W-1).
    pub fn min_code(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Largest representable value, 2^(I-1) - ulp. Exact in f64.
    pub fn max_value(&self) -> f64 {
        self.max_code() as f64 * self.ulp()
    }

    /// Smallest representable value, -2^(I-1). Exact in f64.
    pub fn min_value(&self) -> f64 {
        self.min_code() as f64 * self.ulp()
    }

    fn with_code(&self, code: i64) -> FixedValue {
        debug_assert!(code >= self.min_code() && code <= self.max_code());
        FixedValue { code, spec: *self }
    }
}

impl fmt::Display for FixedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fx<{},{}>", self.total_bits, self.integer_bits)
    }
}

impl FromStr for FixedSpec {
    type Err = FxpError;

    /// Parses the textual notation `fx<W,I>` with default modes
    /// (nearest-even, saturate).
    fn from_str(s: &str) -> Result<Self, FxpError> {
        let err = || FxpError::ParseSpec(s.to_string());
        let body = s
            .trim()
            .strip_prefix("fx<")
            .and_then(|rest| rest.strip_suffix('>'))
            .ok_or_else(err)?;
        let (w, i) = body.split_once(',').ok_or_else(err)?;
        let total: u32 = w.trim().parse().map_err(|_| err())?;
        let integer: u32 = i.trim().parse().map_err(|_| err())?;
        FixedSpec::saturating(total, integer)
    }
}

/// One value under a [`FixedSpec`]: real value = `code * ulp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedValue {
    pub code: i64,
    pub spec: FixedSpec,
}

impl FixedValue {
    /// Builds a value from a raw code, which must fit the spec's W bits.
    pub fn from_code(code: i64, spec: FixedSpec) -> Option<Self> {
        (code >= spec.min_code() && code <= spec.max_code()).then_some(Self { code, spec })
    }

    /// Exact real value of this code.
    pub fn to_real(&self) -> f64 {
        // |code| <= 2^31 and ulp is a power of two, so the product is exact.
        self.code as f64 * self.spec.ulp()
    }

    /// Re-grids this value onto another spec. The flag reports whether the
    /// exact value lies outside the output range.
    pub fn convert(&self, out: FixedSpec) -> (FixedValue, bool) {
        finish(self.code as i128, self.spec.frac_bits(), out)
    }
}

/// Quantizes a finite real onto the spec's grid.
///
/// The flag is set exactly when `x` lies outside the representable range
/// `[min_value, max_value]`; with `Saturate` the result clamps to the nearer
/// endpoint, with `Wrap` the rounded code keeps its low W bits.
pub fn quantize(x: f64, spec: FixedSpec) -> Result<(FixedValue, bool), FxpError> {
    if !x.is_finite() {
        return Err(FxpError::NonFinite);
    }
    let overflowed = x < spec.min_value() || x > spec.max_value();
    let f = spec.frac_bits();
    let (m, e) = decompose(x);
    // Ideal code = round(m * 2^(e + f)), computed exactly.
    let k = e + f as i32;
    let ideal = if m == 0 {
        Some(0)
    } else if k >= 0 {
        // Left shift: exact. Beyond 74 the magnitude is astronomically out of
        // range (m < 2^53) and a wrapped code is 0 since k >= W always holds.
        (k < 74).then(|| (m as i128) << k)
    } else {
        Some(round_shifted(m as i128, (-k) as u32, spec.rounding))
    };
    let code = match ideal {
        Some(c) => apply_overflow(c, spec),
        None => match spec.overflow {
            Overflow::Saturate => {
                if m > 0 {
                    spec.max_code()
                } else {
                    spec.min_code()
                }
            }
            Overflow::Wrap => 0,
        },
    };
    Ok((spec.with_code(code), overflowed))
}

/// Exact addition, re-quantized into `out`.
pub fn fx_add(a: FixedValue, b: FixedValue, out: FixedSpec) -> (FixedValue, bool) {
    let fa = a.spec.frac_bits();
    let fb = b.spec.frac_bits();
    let f = fa.max(fb);
    let sum = ((a.code as i128) << (f - fa)) + ((b.code as i128) << (f - fb));
    finish(sum, f, out)
}

/// Exact multiplication, re-quantized into `out`.
pub fn fx_mul(a: FixedValue, b: FixedValue, out: FixedSpec) -> (FixedValue, bool) {
    let prod = a.code as i128 * b.code as i128;
    finish(prod, a.spec.frac_bits() + b.spec.frac_bits(), out)
}

/// Re-quantizes the exact value `num * 2^-frac_bits` into `out`, returning the
/// coded result and whether the exact value fell outside the output range.
///
/// This is the single rounding/overflow site shared by every arithmetic path,
/// including the widened dot-product accumulators in the inference engine.
pub fn finish(num: i128, frac_bits: u32, out: FixedSpec) -> (FixedValue, bool) {
    let fo = out.frac_bits();
    // Range check on the exact value: compare num * 2^fo against code bounds
    // scaled by 2^frac_bits, aligned so both sides are integers.
    let overflowed = if fo >= frac_bits {
        let shifted = num << (fo - frac_bits);
        shifted < out.min_code() as i128 || shifted > out.max_code() as i128
    } else {
        let s = frac_bits - fo;
        num < (out.min_code() as i128) << s || num > (out.max_code() as i128) << s
    };
    let ideal = if fo >= frac_bits {
        num << (fo - frac_bits)
    } else {
        round_shifted(num, frac_bits - fo, out.rounding)
    };
    (out.with_code(apply_overflow(ideal, out)), overflowed)
}

fn apply_overflow(ideal: i128, spec: FixedSpec) -> i64 {
    let lo = spec.min_code() as i128;
    let hi = spec.max_code() as i128;
    if ideal >= lo && ideal <= hi {
        return ideal as i64;
    }
    match spec.overflow {
        Overflow::Saturate => {
            if ideal < lo {
                spec.min_code()
            } else {
                spec.max_code()
            }
        }
        Overflow::Wrap => {
            let w = spec.total_bits;
            let mask = if w == 128 {
                u128::MAX
            } else {
                (1u128 << w) - 1
            };
            let low = (ideal as u128) & mask;
            if low >> (w - 1) & 1 == 1 {
                (low as i128 - (1i128 << w)) as i64
            } else {
                low as i64
            }
        }
    }
}

/// Rounds `n / 2^s` to an integer. Exact; `s == 0` returns `n` unchanged.
fn round_shifted(n: i128, s: u32, mode: Rounding) -> i128 {
    if s == 0 {
        return n;
    }
    if s >= 127 {
        // Callers only reach this with |n| far below 2^(s-1).
        debug_assert!(n.unsigned_abs() < 1u128 << 126);
        return match mode {
            Rounding::Truncate => {
                if n < 0 {
                    -1
                } else {
                    0
                }
            }
            Rounding::NearestEven => 0,
        };
    }
    let q = n >> s; // floor
    match mode {
        Rounding::Truncate => q,
        Rounding::NearestEven => {
            let r = (n - (q << s)) as u128;
            let half = 1u128 << (s - 1);
            if r > half || (r == half && (q & 1) != 0) {
                q + 1
            } else {
                q
            }
        }
    }
}

/// Splits a finite f64 into integer mantissa and exponent with `x = m * 2^e`.
fn decompose(x: f64) -> (i64, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1i64 } else { 1i64 };
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    if biased == 0 {
        (sign * frac, -1074)
    } else {
        (sign * (frac | (1i64 << 52)), biased - 1075)
    }
}

/// Saturation/wrap event counters keyed by an opaque site label, typically a
/// layer name. One log is confined to a single inference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverflowLog {
    counts: BTreeMap<String, u64>,
}

impl OverflowLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, site: &str) {
        *self.counts.entry(site.to_string()).or_insert(0) += 1;
    }

    pub fn record_many(&mut self, site: &str, events: u64) {
        if events > 0 {
            *self.counts.entry(site.to_string()).or_insert(0) += events;
        }
    }

    pub fn count(&self, site: &str) -> u64 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn sites(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: u32, i: u32) -> FixedSpec {
        FixedSpec::saturating(w, i).unwrap()
    }

    #[test]
    fn spec_16_7_derived_constants() {
        let s = spec(16, 7);
        assert_eq!(s.frac_bits(), 9);
        assert_eq!(s.ulp(), 0.001953125);
        assert_eq!(s.max_value(), 63.998046875);
        assert_eq!(s.min_value(), -64.0);
    }

    #[test]
    fn spec_18_10_derived_constants() {
        let s = spec(18, 10);
        assert_eq!(s.ulp(), 1.0 / 256.0);
        assert_eq!(s.max_value(), 511.99609375);
        assert_eq!(s.min_value(), -512.0);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(FixedSpec::saturating(16, 17).is_err());
        assert!(FixedSpec::saturating(16, 0).is_err());
        assert!(FixedSpec::saturating(33, 7).is_err());
        assert!(FixedSpec::saturating(3, 1).is_err());
        assert!(FixedSpec::saturating(32, 32).is_ok());
        assert!(FixedSpec::saturating(4, 1).is_ok());
    }

    #[test]
    fn quantize_exact_value() {
        let (v, flag) = quantize(0.5, spec(16, 7)).unwrap();
        assert_eq!(v.code, 256);
        assert_eq!(v.to_real(), 0.5);
        assert!(!flag);
    }

    #[test]
    fn quantize_saturates_and_flags() {
        // max code (2^15 - 1) * ulp = 63.998046875
        let (v, flag) = quantize(100.0, spec(16, 7)).unwrap();
        assert_eq!(v.code, 32767);
        assert_eq!(v.to_real(), 63.998046875);
        assert!(flag);

        let (v, flag) = quantize(-100.0, spec(16, 7)).unwrap();
        assert_eq!(v.code, -32768);
        assert_eq!(v.to_real(), -64.0);
        assert!(flag);
    }

    #[test]
    fn quantize_below_half_ulp_rounds_to_zero() {
        let (v, flag) = quantize(0.0001, spec(16, 7)).unwrap();
        assert_eq!(v.code, 0);
        assert!(!flag);
    }

    #[test]
    fn quantize_rejects_non_finite() {
        assert_eq!(quantize(f64::NAN, spec(16, 7)), Err(FxpError::NonFinite));
        assert_eq!(
            quantize(f64::INFINITY, spec(16, 7)),
            Err(FxpError::NonFinite)
        );
    }

    #[test]
    fn quantize_ties_to_even() {
        let s = spec(16, 7);
        // 1.5 ulp is halfway between codes 1 and 2: picks 2 (even).
        let (v, _) = quantize(1.5 * s.ulp(), s).unwrap();
        assert_eq!(v.code, 2);
        // 0.5 ulp halfway between 0 and 1: picks 0.
        let (v, _) = quantize(0.5 * s.ulp(), s).unwrap();
        assert_eq!(v.code, 0);
        // -0.5 ulp: picks 0 as well.
        let (v, _) = quantize(-0.5 * s.ulp(), s).unwrap();
        assert_eq!(v.code, 0);
    }

    #[test]
    fn quantize_wrap_mode() {
        let s = FixedSpec::new(16, 7, Rounding::NearestEven, Overflow::Wrap).unwrap();
        // 64.0 is one ulp past max: ideal code 2^15 wraps to -2^15.
        let (v, flag) = quantize(64.0, s).unwrap();
        assert_eq!(v.code, -32768);
        assert!(flag);
    }

    #[test]
    fn quantize_huge_magnitudes() {
        let sat = spec(16, 7);
        let (v, flag) = quantize(1e300, sat).unwrap();
        assert_eq!(v.code, sat.max_code());
        assert!(flag);
        let wrap = FixedSpec::new(16, 7, Rounding::NearestEven, Overflow::Wrap).unwrap();
        let (v, flag) = quantize(-1e300, wrap).unwrap();
        assert_eq!(v.code, 0); // divisible by 2^16 at that magnitude
        assert!(flag);
    }

    #[test]
    fn to_real_examples() {
        let s = spec(16, 7);
        assert_eq!(FixedValue::from_code(512, s).unwrap().to_real(), 1.0);
        assert_eq!(FixedValue::from_code(0, s).unwrap().to_real(), 0.0);
        assert_eq!(FixedValue::from_code(-32768, s).unwrap().to_real(), -64.0);
    }

    #[test]
    fn mul_exact_product() {
        let s = spec(16, 7);
        let a = quantize(0.5, s).unwrap().0;
        let b = quantize(0.25, s).unwrap().0;
        let (p, flag) = fx_mul(a, b, s);
        assert_eq!(p.to_real(), 0.125);
        assert!(!flag);
    }

    #[test]
    fn mul_saturates_past_range() {
        let s = spec(16, 7);
        let a = quantize(60.0, s).unwrap().0;
        let b = quantize(2.0, s).unwrap().0;
        let (p, flag) = fx_mul(a, b, s);
        assert_eq!(p.to_real(), 63.998046875);
        assert!(flag);
    }

    #[test]
    fn add_identity() {
        let s = spec(16, 7);
        for x in [-64.0, -1.25, 0.0, 0.001953125, 63.998046875] {
            let a = quantize(x, s).unwrap().0;
            let z = quantize(0.0, s).unwrap().0;
            let (r, flag) = fx_add(a, z, s);
            assert_eq!(r, a);
            assert!(!flag);
        }
    }

    #[test]
    fn add_mixed_specs() {
        let a = quantize(1.5, spec(16, 7)).unwrap().0; // frac 9
        let b = quantize(0.25, spec(16, 10)).unwrap().0; // frac 6
        let (r, flag) = fx_add(a, b, spec(16, 7));
        assert_eq!(r.to_real(), 1.75);
        assert!(!flag);
    }

    #[test]
    fn truncate_rounds_toward_negative_infinity() {
        let s = FixedSpec::new(16, 7, Rounding::Truncate, Overflow::Saturate).unwrap();
        let (v, _) = quantize(0.9 * s.ulp(), s).unwrap();
        assert_eq!(v.code, 0);
        let (v, _) = quantize(-0.1 * s.ulp(), s).unwrap();
        assert_eq!(v.code, -1);
    }

    #[test]
    fn convert_widening_is_lossless() {
        let narrow = spec(16, 7);
        let wide = spec(32, 16);
        for x in [-63.5, -0.125, 0.0, 1.0, 63.998046875] {
            let v = quantize(x, narrow).unwrap().0;
            let (w, flag) = v.convert(wide);
            assert_eq!(w.to_real(), v.to_real());
            assert!(!flag);
        }
    }

    #[test]
    fn spec_notation_round_trips() {
        let s = spec(16, 7);
        assert_eq!(s.to_string(), "fx<16,7>");
        assert_eq!("fx<16,7>".parse::<FixedSpec>().unwrap(), s);
        assert_eq!(" fx<18, 10> ".parse::<FixedSpec>().unwrap(), spec(18, 10));
        assert!("fx<16;7>".parse::<FixedSpec>().is_err());
        assert!("fx<16,17>".parse::<FixedSpec>().is_err());
    }

    #[test]
    fn overflow_log_accumulates_per_site() {
        let mut log = OverflowLog::new();
        log.record("dense1");
        log.record("dense1");
        log.record_many("conv2", 3);
        log.record_many("conv3", 0);
        assert_eq!(log.count("dense1"), 2);
        assert_eq!(log.count("conv2"), 3);
        assert_eq!(log.count("conv3"), 0);
        assert_eq!(log.total(), 5);
    }
}
