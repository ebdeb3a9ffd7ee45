//! Datagram wire format, little-endian throughout.
//!
//! Input:  `"BLM1" | seq u32 | send_timestamp_ns u64 | 260 x f32`, 1,056 bytes.
//! Output: `"DBL1" | seq u32 | 520 x f32 | decision u8 | latency_ns u32`, 2,093 bytes.
//!
//! One frame per datagram; anything with the wrong size or magic is counted
//! as malformed and skipped, never fatal.

use crate::workbench::{decide_source, Decision};
use crate::{FRAME_LEN, OUTPUT_LEN};

pub const INPUT_MAGIC: &[u8; 4] = b"BLM1";
pub const OUTPUT_MAGIC: &[u8; 4] = b"DBL1";
pub const INPUT_DATAGRAM_LEN: usize = 4 + 4 + 8 + FRAME_LEN * 4;
pub const OUTPUT_DATAGRAM_LEN: usize = 4 + 4 + OUTPUT_LEN * 4 + 1 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct WireFrame {
    pub seq: u32,
    pub send_timestamp_ns: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireOutput {
    pub seq: u32,
    pub values: Vec<f32>,
    pub decision: Decision,
    pub latency_ns: u32,
}

#[derive(Debug, PartialEq, Eq)]
pub enum WireError {
    BadLength(usize),
    BadMagic,
    NonFinite,
    BadDecision(u8),
}

pub fn encode_frame(seq: u32, send_timestamp_ns: u64, values: &[f64]) -> Vec<u8> {
    debug_assert_eq!(values.len(), FRAME_LEN);
    let mut out = Vec::with_capacity(INPUT_DATAGRAM_LEN);
    out.extend_from_slice(INPUT_MAGIC);
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(&send_timestamp_ns.to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    debug_assert_eq!(out.len(), INPUT_DATAGRAM_LEN);
    out
}

pub fn decode_frame(buf: &[u8]) -> Result<WireFrame, WireError> {
    if buf.len() != INPUT_DATAGRAM_LEN {
        return Err(WireError::BadLength(buf.len()));
    }
    if &buf[..4] != INPUT_MAGIC {
        return Err(WireError::BadMagic);
    }
    let seq = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let send_timestamp_ns = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    let mut values = Vec::with_capacity(FRAME_LEN);
    for chunk in buf[16..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(WireError::NonFinite);
        }
        values.push(v);
    }
    Ok(WireFrame {
        seq,
        send_timestamp_ns,
        values,
    })
}

/// Encodes an output datagram. The decision byte is derived from the f32
/// values actually emitted, so it always matches a receiver-side
/// recomputation.
pub fn encode_output(seq: u32, values: &[f64], latency_ns: u32) -> (Vec<u8>, Decision) {
    debug_assert_eq!(values.len(), OUTPUT_LEN);
    let as_f32: Vec<f32> = values.iter().map(|&v| v as f32).collect();
    let wide: Vec<f64> = as_f32.iter().map(|&v| v as f64).collect();
    let decision = decide_source(&wide);
    let mut out = Vec::with_capacity(OUTPUT_DATAGRAM_LEN);
    out.extend_from_slice(OUTPUT_MAGIC);
    out.extend_from_slice(&seq.to_le_bytes());
    for v in &as_f32 {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(decision.as_byte());
    out.extend_from_slice(&latency_ns.to_le_bytes());
    debug_assert_eq!(out.len(), OUTPUT_DATAGRAM_LEN);
    (out, decision)
}

pub fn decode_output(buf: &[u8]) -> Result<WireOutput, WireError> {
    if buf.len() != OUTPUT_DATAGRAM_LEN {
        return Err(WireError::BadLength(buf.len()));
    }
    if &buf[..4] != OUTPUT_MAGIC {
        return Err(WireError::BadMagic);
    }
    let seq = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let values: Vec<f32> = buf[8..8 + OUTPUT_LEN * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let decision_byte = buf[8 + OUTPUT_LEN * 4];
    let decision =
        Decision::from_byte(decision_byte).ok_or(WireError::BadDecision(decision_byte))?;
    let latency_ns = u32::from_le_bytes(buf[OUTPUT_DATAGRAM_LEN - 4..].try_into().unwrap());
    Ok(WireOutput {
        seq,
        values,
        decision,
        latency_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datagram_sizes_are_pinned() {
        assert_eq!(INPUT_DATAGRAM_LEN, 1_056);
        assert_eq!(OUTPUT_DATAGRAM_LEN, 2_093);
    }

    #[test]
    fn frame_round_trip() {
        let values: Vec<f64> = (0..FRAME_LEN).map(|i| i as f64 * 0.5).collect();
        let buf = encode_frame(42, 123_456_789, &values);
        let back = decode_frame(&buf).unwrap();
        assert_eq!(back.seq, 42);
        assert_eq!(back.send_timestamp_ns, 123_456_789);
        assert_eq!(back.values, values); // exact: values fit f32
    }

    #[test]
    fn bad_magic_and_length_rejected() {
        let values = vec![0.0; FRAME_LEN];
        let mut buf = encode_frame(1, 0, &values);
        buf[0] = b'X';
        assert_eq!(decode_frame(&buf), Err(WireError::BadMagic));
        assert_eq!(decode_frame(&buf[..100]), Err(WireError::BadLength(100)));
    }

    #[test]
    fn output_round_trip_keeps_decision_consistent() {
        let values: Vec<f64> = (0..OUTPUT_LEN)
            .map(|i| if i % 2 == 0 { 0.8 } else { 0.2 })
            .collect();
        let (buf, decision) = encode_output(7, &values, 1_234);
        assert_eq!(decision, Decision::Mi);
        let back = decode_output(&buf).unwrap();
        assert_eq!(back.seq, 7);
        assert_eq!(back.decision, Decision::Mi);
        assert_eq!(back.latency_ns, 1_234);
        let wide: Vec<f64> = back.values.iter().map(|&v| v as f64).collect();
        assert_eq!(decide_source(&wide), back.decision);
    }
}
