//! Three-stage pipeline: receive -> infer -> emit. Each stage is a single
//! thread; hand-offs are ownership transfers through bounded drop-oldest
//! queues; statistics are owned by the emit stage. Shutdown stops the
//! receiver, then a sentinel drains the queues deterministically.

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::queue::BoundedQueue;
use super::stats::{stats_report, LatencyRecord, RunStats};
use super::wire;
use super::{Engine, NodeConfig, NodeError};
use crate::nn::Frame;
use crate::workbench::StandardizationParams;

#[derive(Debug, Default)]
struct Counters {
    received: AtomicU64,
    malformed: AtomicU64,
    dropped: AtomicU64,
    processed: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub received: u64,
    pub malformed: u64,
    pub dropped: u64,
    pub processed: u64,
}

#[derive(Debug, Clone)]
pub struct NodeOptions {
    pub listen: String,
    pub emit: String,
    pub deadline_ns: u64,
    pub queue_capacity: usize,
    pub standardize: Option<StandardizationParams>,
}

impl NodeOptions {
    pub fn from_config(config: &NodeConfig) -> Self {
        Self {
            listen: config.listen.clone(),
            emit: config.emit.clone(),
            deadline_ns: config.deadline_ns,
            queue_capacity: config.queue_capacity,
            standardize: config.standardize,
        }
    }
}

struct PendingFrame {
    frame: Frame,
    ingress: Instant,
}

struct PendingResult {
    seq: u32,
    ingress: Instant,
    values: Vec<f64>,
    engine_ns: u64,
}

enum Job {
    Frame(PendingFrame),
    Stop,
}

enum Done {
    Result(PendingResult),
    Stop,
}

pub struct Node;

impl Node {
    /// Binds the sockets, spawns the pipeline, and returns a handle. The
    /// service keeps running until [`NodeHandle::shutdown`].
    pub fn start(engine: Engine, opts: NodeOptions) -> Result<NodeHandle, NodeError> {
        let socket = UdpSocket::bind(&opts.listen).map_err(|source| NodeError::Bind {
            addr: opts.listen.clone(),
            source,
        })?;
        socket
            .set_read_timeout(Some(Duration::from_millis(20)))
            .expect("timeout is valid");
        grow_receive_buffer(&socket);
        let local_addr = socket.local_addr()?;
        let emit_socket = UdpSocket::bind("0.0.0.0:0").map_err(|source| NodeError::Bind {
            addr: "0.0.0.0:0".into(),
            source,
        })?;
        let emit_target: SocketAddr = opts
            .emit
            .parse()
            .map_err(|e| NodeError::Config(format!("bad emit address {:?}: {e}", opts.emit)))?;

        let counters = Arc::new(Counters::default());
        let stop = Arc::new(AtomicBool::new(false));
        let jobs: Arc<BoundedQueue<Job>> = Arc::new(BoundedQueue::new(opts.queue_capacity));
        let done: Arc<BoundedQueue<Done>> = Arc::new(BoundedQueue::new(opts.queue_capacity));

        let recv_thread = {
            let counters = Arc::clone(&counters);
            let stop = Arc::clone(&stop);
            let jobs = Arc::clone(&jobs);
            let standardize = opts.standardize;
            std::thread::spawn(move || {
                receive_loop(&socket, &counters, &stop, &jobs, standardize);
            })
        };

        let infer_thread = {
            let counters = Arc::clone(&counters);
            let jobs = Arc::clone(&jobs);
            let done = Arc::clone(&done);
            let mut engine = engine;
            std::thread::spawn(move || loop {
                match jobs.pop_wait() {
                    Job::Frame(pending) => {
                        let (output, engine_ns) = engine.infer(&pending.frame);
                        let result = PendingResult {
                            seq: pending.frame.seq,
                            ingress: pending.ingress,
                            values: output.values,
                            engine_ns,
                        };
                        if done.force_push(Done::Result(result)).is_some() {
                            counters.dropped.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                    Job::Stop => {
                        done.push_wait(Done::Stop);
                        break;
                    }
                }
            })
        };

        let emit_thread = {
            let counters = Arc::clone(&counters);
            let done = Arc::clone(&done);
            let deadline_ns = opts.deadline_ns;
            std::thread::spawn(move || {
                let mut records: Vec<LatencyRecord> = Vec::new();
                while let Done::Result(result) = done.pop_wait() {
                    let provisional = result.ingress.elapsed().as_nanos() as u64;
                    let (datagram, _) = wire::encode_output(
                        result.seq,
                        &result.values,
                        provisional.min(u32::MAX as u64) as u32,
                    );
                    // Losing the sink is not fatal; the frame still counts
                    // as processed.
                    let _ = emit_socket.send_to(&datagram, emit_target);
                    let e2e_ns = result.ingress.elapsed().as_nanos() as u64;
                    records.push(LatencyRecord {
                        seq: result.seq,
                        e2e_ns,
                        deadline_met: e2e_ns <= deadline_ns,
                        engine_ns: result.engine_ns,
                    });
                    counters.processed.fetch_add(1, Ordering::Relaxed);
                }
                records
            })
        };

        Ok(NodeHandle {
            local_addr,
            deadline_ns: opts.deadline_ns,
            counters,
            stop,
            started: Instant::now(),
            recv_thread,
            infer_thread,
            emit_thread,
        })
    }
}

/// Asks the kernel for a multi-megabyte receive buffer so short scheduling
/// stalls do not shed datagrams; the kernel caps the request at rmem_max.
fn grow_receive_buffer(socket: &UdpSocket) {
    use std::os::fd::AsRawFd;
    let bytes: libc::c_int = 4 * 1024 * 1024;
    unsafe {
        libc::setsockopt(
            socket.as_raw_fd(),
            libc::SOL_SOCKET,
            libc::SO_RCVBUF,
            &bytes as *const _ as *const libc::c_void,
            std::mem::size_of_val(&bytes) as libc::socklen_t,
        );
    }
}

fn receive_loop(
    socket: &UdpSocket,
    counters: &Counters,
    stop: &AtomicBool,
    jobs: &BoundedQueue<Job>,
    standardize: Option<StandardizationParams>,
) {
    let mut buf = [0u8; 4096];
    while !stop.load(Ordering::SeqCst) {
        let (len, _) = match socket.recv_from(&mut buf) {
            Ok(ok) => ok,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(_) => continue,
        };
        let ingress = Instant::now();
        counters.received.fetch_add(1, Ordering::Relaxed);
        let decoded = match wire::decode_frame(&buf[..len]) {
            Ok(d) => d,
            Err(_) => {
                counters.malformed.fetch_add(1, Ordering::Relaxed);
                continue;
            }
        };
        let mut frame = match Frame::new(decoded.values, decoded.seq, decoded.send_timestamp_ns) {
            Ok(f) => f,
            Err(_) => {
                counters.malformed.fetch_add(1, Ordering::Relaxed);
                continue;
            }
        };
        if let Some(params) = &standardize {
            match crate::workbench::standardize(&frame, params) {
                Ok(f) => frame = f,
                Err(_) => {
                    counters.malformed.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
            }
        }
        if jobs
            .force_push(Job::Frame(PendingFrame { frame, ingress }))
            .is_some()
        {
            counters.dropped.fetch_add(1, Ordering::Relaxed);
        }
        // Give the infer stage a scheduling chance per frame; matters on
        // single-core hosts where a datagram backlog would otherwise drain
        // into the bounded queue faster than it empties.
        std::thread::yield_now();
    }
    jobs.push_wait(Job::Stop);
}

pub struct NodeHandle {
    local_addr: SocketAddr,
    deadline_ns: u64,
    counters: Arc<Counters>,
    stop: Arc<AtomicBool>,
    started: Instant,
    recv_thread: JoinHandle<()>,
    infer_thread: JoinHandle<()>,
    emit_thread: JoinHandle<Vec<LatencyRecord>>,
}

impl NodeHandle {
    /// The bound listen address (useful with port 0).
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn counters(&self) -> CounterSnapshot {
        CounterSnapshot {
            received: self.counters.received.load(Ordering::Relaxed),
            malformed: self.counters.malformed.load(Ordering::Relaxed),
            dropped: self.counters.dropped.load(Ordering::Relaxed),
            processed: self.counters.processed.load(Ordering::Relaxed),
        }
    }

    /// Stops the receiver, drains the pipeline, and returns the run
    /// statistics together with the raw latency records.
    pub fn shutdown(self) -> Result<(RunStats, Vec<LatencyRecord>), NodeError> {
        self.stop.store(true, Ordering::SeqCst);
        self.recv_thread.join().expect("receive stage exits");
        self.infer_thread.join().expect("infer stage exits");
        let records = self.emit_thread.join().expect("emit stage exits");
        let wall = self.started.elapsed().as_secs_f64();
        let snapshot = CounterSnapshot {
            received: self.counters.received.load(Ordering::SeqCst),
            malformed: self.counters.malformed.load(Ordering::SeqCst),
            dropped: self.counters.dropped.load(Ordering::SeqCst),
            processed: self.counters.processed.load(Ordering::SeqCst),
        };
        let stats = stats_report(
            &records,
            self.deadline_ns,
            (snapshot.received, snapshot.dropped, snapshot.malformed),
            Some(wall),
        )?;
        Ok((stats, records))
    }
}

/// Loads the engine from `config`, runs the service until `stop` flips, and
/// returns the final statistics and records.
pub fn serve(
    config: &NodeConfig,
    stop: &AtomicBool,
) -> Result<(RunStats, Vec<LatencyRecord>), NodeError> {
    let engine = Engine::from_config(config)?;
    let handle = Node::start(engine, NodeOptions::from_config(config))?;
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    handle.shutdown()
}
