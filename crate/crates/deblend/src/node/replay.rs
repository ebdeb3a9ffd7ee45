//! Fixed-rate frame sender: replays a frame set (or a synthetic stream) at a
//! target frame rate against a UDP endpoint, with monotonically increasing
//! sequence numbers and an absolute send schedule so rate error does not
//! accumulate.

use std::net::UdpSocket;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::wire::encode_frame;
use super::NodeError;
use crate::nn::Frame;
use crate::workbench::{synth_frames, FrameMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenderReport {
    pub sent: u64,
    pub wall_seconds: f64,
    pub target_fps: f64,
    pub achieved_fps: f64,
    /// (achieved - target) / target.
    pub rate_error: f64,
}

fn epoch_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

/// Sends every frame at interval 1/fps, reporting the achieved rate.
pub fn replay(frames: &[Frame], fps: f64, target: &str) -> Result<SenderReport, NodeError> {
    if !fps.is_finite() || fps <= 0.0 {
        return Err(NodeError::Config("fps must be positive".into()));
    }
    if frames.is_empty() {
        return Err(NodeError::Config("nothing to replay".into()));
    }
    let socket = UdpSocket::bind("0.0.0.0:0").map_err(|source| NodeError::Bind {
        addr: "0.0.0.0:0".into(),
        source,
    })?;
    let period = Duration::from_secs_f64(1.0 / fps);
    let start = Instant::now();
    let mut min_next = start;
    for (i, frame) in frames.iter().enumerate() {
        // Absolute schedule with bounded catch-up: after a host stall the
        // sender recovers at no more than twice the nominal rate instead of
        // burst-sending, so a receiver's shallow queue is never flooded,
        // and the schedule converges back to start + i/fps.
        let due = (start + period.mul_f64(i as f64)).max(min_next);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        let datagram = encode_frame(i as u32, epoch_ns(), frame.values());
        socket.send_to(&datagram, target)?;
        min_next = Instant::now() + period / 2;
    }
    let wall = start.elapsed().as_secs_f64();
    // The schedule spaces sends by (n-1) periods; rate accordingly.
    let spans = (frames.len() - 1).max(1) as f64;
    let achieved = spans / wall;
    Ok(SenderReport {
        sent: frames.len() as u64,
        wall_seconds: wall,
        target_fps: fps,
        achieved_fps: achieved,
        rate_error: (achieved - fps) / fps,
    })
}

/// Replays `count` deterministic synthetic frames.
pub fn replay_synthetic(
    seed: u64,
    count: usize,
    mode: FrameMode,
    fps: f64,
    target: &str,
) -> Result<SenderReport, NodeError> {
    replay(&synth_frames(seed, count, mode), fps, target)
}
