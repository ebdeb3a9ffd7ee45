//! Latency records and run statistics: exact order statistics with
//! nearest-rank percentiles, a fixed 50 us histogram, and CSV persistence.

use serde::{Deserialize, Serialize};

use super::NodeError;

/// Histogram bin width for latency distributions.
pub const HISTOGRAM_BIN_NS: u64 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub seq: u32,
    /// Ingress (datagram receipt) to egress (send completion), wall clock.
    pub e2e_ns: u64,
    pub deadline_met: bool,
    /// Engine time: compute wall time, or the simulated transaction latency
    /// when the engine is the bridge simulator.
    pub engine_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: u64,
    pub mean_ns: f64,
    pub min_ns: u64,
    pub max_ns: u64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub deadline_miss: u64,
    /// (bin start ns, count) в fixed 50 us bins; mass equals `count`.
    pub histogram: Vec<(u64, u64)>,
}

impl LatencySummary {
    fn from_latencies(latencies: &[u64], deadline_ns: u64) -> Self {
        let mut sorted = latencies.to_vec();
        sorted.sort_unstable();
        let count = sorted.len() as u64;
        let sum: u128 = sorted.iter().map(|&v| v as u128).sum();
        Self {
            count,
            mean_ns: sum as f64 / count as f64,
            min_ns: sorted[0],
            max_ns: *sorted.last().unwrap(),
            p50_ns: nearest_rank(&sorted, 50.0),
            p99_ns: nearest_rank(&sorted, 99.0),
            deadline_miss: sorted.iter().filter(|&&l| l > deadline_ns).count() as u64,
            histogram: crate::bridge::latency_histogram(latencies, HISTOGRAM_BIN_NS),
        }
    }

    /// Latency of the fullest histogram bin's start, the distribution mode.
    pub fn mode_bin_ns(&self) -> u64 {
        self.histogram
            .iter()
            .max_by_key(|(_, count)| *count)
            .map(|(start, _)| *start)
            .unwrap_or(0)
    }
}

/// Nearest-rank percentile over a sorted slice: the ceil(p/100 * n)-th value.
fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len() as f64;
    let rank = ((p / 100.0 * n).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub received: u64,
    pub processed: u64,
    pub dropped: u64,
    pub malformed: u64,
    pub deadline_ns: u64,
    pub wall_seconds: Option<f64>,
    /// processed / wall_seconds, when wall time is known.
    pub achieved_fps: Option<f64>,
    pub e2e: LatencySummary,
    pub engine: LatencySummary,
}

impl RunStats {
    pub fn summary_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "frames: received {}, processed {}, dropped {}, malformed {}\n",
            self.received, self.processed, self.dropped, self.malformed
        ));
        if let (Some(wall), Some(fps)) = (self.wall_seconds, self.achieved_fps) {
            out.push_str(&format!("wall: {wall:.3} s, achieved {fps:.1} fps\n"));
        }
        let ms = |ns: u64| ns as f64 / 1e6;
        out.push_str(&format!(
            "e2e latency ms: mean {:.3} min {:.3} p50 {:.3} p99 {:.3} max {:.3}, deadline({:.1} ms) misses {}\n",
            self.e2e.mean_ns / 1e6,
            ms(self.e2e.min_ns),
            ms(self.e2e.p50_ns),
            ms(self.e2e.p99_ns),
            ms(self.e2e.max_ns),
            self.deadline_ns as f64 / 1e6,
            self.e2e.deadline_miss
        ));
        out.push_str(&format!(
            "engine latency ms: mean {:.3} min {:.3} p50 {:.3} p99 {:.3} max {:.3}\n",
            self.engine.mean_ns / 1e6,
            ms(self.engine.min_ns),
            ms(self.engine.p50_ns),
            ms(self.engine.p99_ns),
            ms(self.engine.max_ns),
        ));
        out
    }
}

/// Builds run statistics from latency records. Deadline misses are
/// recomputed against `deadline_ns`, boundary inclusive: a latency equal to
/// the deadline is met.
pub fn stats_report(
    records: &[LatencyRecord],
    deadline_ns: u64,
    counters: (u64, u64, u64), // received, dropped, malformed
    wall_seconds: Option<f64>,
) -> Result<RunStats, NodeError> {
    if records.is_empty() {
        return Err(NodeError::NoRecords);
    }
    let e2e: Vec<u64> = records.iter().map(|r| r.e2e_ns).collect();
    let engine: Vec<u64> = records.iter().map(|r| r.engine_ns).collect();
    let (received, dropped, malformed) = counters;
    let processed = records.len() as u64;
    Ok(RunStats {
        received,
        processed,
        dropped,
        malformed,
        deadline_ns,
        wall_seconds,
        achieved_fps: wall_seconds.map(|w| processed as f64 / w),
        e2e: LatencySummary::from_latencies(&e2e, deadline_ns),
        engine: LatencySummary::from_latencies(&engine, deadline_ns),
    })
}

pub fn records_to_csv(records: &[LatencyRecord]) -> String {
    let mut out = String::from("seq,e2e_ns,engine_ns,deadline_met\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.seq, r.e2e_ns, r.engine_ns, r.deadline_met as u8
        ));
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<LatencyRecord>, NodeError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue; // header
        }
        let parts: Vec<&str> = line.split(',').collect();
        let bad = |m: &str| NodeError::Config(format!("records csv line {}: {m}", i + 1));
        if parts.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        records.push(LatencyRecord {
            seq: parts[0].trim().parse().map_err(|_| bad("bad seq"))?,
            e2e_ns: parts[1].trim().parse().map_err(|_| bad("bad e2e_ns"))?,
            engine_ns: parts[2].trim().parse().map_err(|_| bad("bad engine_ns"))?,
            deadline_met: parts[3].trim() == "1",
        });
    }
    Ok(records)
}
