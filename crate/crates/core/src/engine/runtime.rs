use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Barrier, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::monitor::{InvariantMonitor, InvariantViolation};
use super::stats::MessageCounts;
use super::worker::{StepOutcome, VertexState, Worker};
use super::{collect_forest, negotiate_wire_mode, EngineConfig, EngineError, RunReport, TransportMode, WeightMode};
use crate::exact::ExactSum;
use crate::graph::{partition_block, EdgeList, EdgeState, LocalGraph};
use crate::protocol::{Message, WireMode};
use crate::transport::{threaded_endpoints, QuiescenceCounters, QuiescenceDetector, SimNetwork};
use crate::{VertexId, WorkerId};

/// Partitions `graph` into `cfg.num_workers` blocks and runs to quiescence.
///
/// The input must be simple: no loops and no parallel edges (see
/// [`crate::graph::preprocess`]).
pub fn run(graph: &EdgeList, cfg: &EngineConfig) -> Result<RunReport, EngineError> {
    cfg.validate()?;
    graph.validate()?;
    let parts = partition_block(graph, cfg.num_workers)?;
    run_partitioned(&parts, cfg)
}

/// Runs on an existing partition. `cfg.num_workers` is ignored.
pub fn run_partitioned(parts: &[LocalGraph], cfg: &EngineConfig) -> Result<RunReport, EngineError> {
    cfg.validate()?;
    match cfg.transport {
        TransportMode::Deterministic => Simulation::from_partitions(parts, cfg)?.run_to_completion(),
        TransportMode::Threaded => run_threaded(parts, cfg),
    }
}

fn setup(parts: &[LocalGraph], cfg: &EngineConfig) -> Result<(Vec<Worker>, WireMode, bool), EngineError> {
    if parts.is_empty() {
        return Err(crate::Error::param("no partitions").into());
    }
    let mode = negotiate_wire_mode(parts, cfg.weight_mode);
    let fallback = cfg.weight_mode == WeightMode::Compressed && mode == WireMode::Wide;
    let workers = parts.iter().map(|p| Worker::new(p, cfg, mode)).collect::<Result<Vec<_>, _>>()?;
    Ok((workers, mode, fallback))
}

struct Totals {
    wire_mode: WireMode,
    wire_mode_fallback: bool,
    collective_rounds: u64,
    blocks_sent: u64,
    elapsed: Duration,
    steps: u64,
    trace_digest: Option<String>,
    violations: Vec<InvariantViolation>,
}

fn build_report(num_vertices: usize, mut workers: Vec<Worker>, t: Totals) -> Result<RunReport, EngineError> {
    let forest = collect_forest(num_vertices, workers.iter().map(Worker::branch_edges).collect())?;
    let forest_weight: ExactSum = forest.edges.iter().map(|e| e.w).collect();
    let mut messages = MessageCounts::default();
    let mut flushes = Vec::new();
    for w in &mut workers {
        messages += w.messages();
        flushes.extend(w.take_flushes());
    }
    flushes.sort_by_key(|f| (f.time, f.worker));
    Ok(RunReport {
        forest,
        forest_weight,
        wire_mode: t.wire_mode,
        wire_mode_fallback: t.wire_mode_fallback,
        messages,
        iterations: workers.iter().map(Worker::iteration).max().unwrap_or(0),
        collective_rounds: t.collective_rounds,
        blocks_sent: t.blocks_sent,
        bytes_sent: workers.iter().map(Worker::bytes_sent).sum(),
        flushes,
        elapsed: t.elapsed,
        steps: t.steps,
        trace_digest: t.trace_digest,
        violations: t.violations,
        halted_cores: workers.iter().map(Worker::halted_cores).sum(),
        deferred_main: workers.iter().map(|w| w.deferrals()[0]).sum(),
        deferred_tests: workers.iter().map(|w| w.deferrals()[1]).sum(),
    })
}

/// Single-threaded, seeded execution of all workers over a [`SimNetwork`].
///
/// Each scheduler step either delivers the head block of a random non-empty
/// channel or runs one loop iteration of a random worker. A worker that
/// reaches a collective check pauses until every worker has arrived; the
/// check then runs and either ends the run or releases everyone.
///
/// The same seed and configuration always give the same delivery trace.
pub struct Simulation {
    workers: Vec<Worker>,
    net: SimNetwork,
    paused: Vec<bool>,
    detector: QuiescenceDetector,
    rng: ChaCha8Rng,
    deliver_bias: f64,
    steps: u64,
    max_steps: u64,
    monitor: Option<InvariantMonitor>,
    done: bool,
    num_vertices: usize,
    wire_mode: WireMode,
    wire_mode_fallback: bool,
    started: Instant,
}

impl Simulation {
    pub fn new(graph: &EdgeList, cfg: &EngineConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        graph.validate()?;
        Self::from_partitions(&partition_block(graph, cfg.num_workers)?, cfg)
    }

    pub fn from_partitions(parts: &[LocalGraph], cfg: &EngineConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let (workers, wire_mode, wire_mode_fallback) = setup(parts, cfg)?;
        let num_vertices = parts[0].num_global_vertices;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let deliver_bias = rng.random_range(0.2..0.8);
        Ok(Simulation {
            net: SimNetwork::new(workers.len()),
            paused: vec![false; workers.len()],
            workers,
            detector: QuiescenceDetector::new(),
            rng,
            deliver_bias,
            steps: 0,
            max_steps: cfg.max_steps,
            monitor: cfg.check_invariants.then(|| InvariantMonitor::new(num_vertices)),
            done: false,
            num_vertices,
            wire_mode,
            wire_mode_fallback,
            started: Instant::now(),
        })
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn wire_mode(&self) -> WireMode {
        self.wire_mode
    }

    /// True once a collective check has declared termination.
    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_paused(&self, rank: WorkerId) -> bool {
        self.paused[rank]
    }

    pub fn all_paused(&self) -> bool {
        self.paused.iter().all(|&p| p)
    }

    /// Blocks sent but not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.net.in_flight()
    }

    /// Every message currently waiting in a deferral queue.
    pub fn deferred_messages(&self) -> Vec<Message> {
        self.workers.iter().flat_map(|w| w.deferred().copied()).collect()
    }

    /// `(src, dst)` pairs with at least one undelivered block.
    pub fn busy_channels(&self) -> Vec<(WorkerId, WorkerId)> {
        self.net.busy_channels().collect()
    }

    /// Ground truth for tests: nothing in flight, nothing waiting in any
    /// inbox, and every worker's queues and buffers empty.
    pub fn is_truly_quiescent(&self) -> bool {
        self.net.in_flight() == 0
            && (0..self.workers.len()).all(|r| self.net.undelivered_to_worker(r) == 0)
            && self.workers.iter().all(|w| w.counters().queues_empty)
    }

    pub fn counters(&self) -> Vec<QuiescenceCounters> {
        self.workers.iter().map(Worker::counters).collect()
    }

    pub fn vertex_state(&self, v: VertexId) -> Option<&VertexState> {
        self.workers.iter().find(|w| w.owns(v)).and_then(|w| w.vertex_state(v))
    }

    /// State of edge `(u, v)` as recorded at `u`.
    pub fn edge_state(&self, u: VertexId, v: VertexId) -> Option<EdgeState> {
        self.workers.iter().find(|w| w.owns(u)).and_then(|w| w.edge_state(u, v))
    }

    pub fn violations(&self) -> &[InvariantViolation] {
        self.monitor.as_ref().map(|m| m.violations.as_slice()).unwrap_or(&[])
    }

    /// Runs one loop iteration of `rank`. Returns true if the worker reached
    /// a collective check and is now paused. Paused workers are not stepped.
    pub fn step_worker(&mut self, rank: WorkerId) -> Result<bool, EngineError> {
        if self.paused[rank] || self.done {
            return Ok(self.paused[rank]);
        }
        self.steps += 1;
        let mut ep = self.net.endpoint(rank);
        let outcome = self.workers[rank].step(&mut ep, self.steps)?;
        if let Some(m) = self.monitor.as_mut() {
            m.observe(self.workers[rank].drain_events(), self.steps);
        }
        if outcome == StepOutcome::Collective {
            self.paused[rank] = true;
        }
        Ok(self.paused[rank])
    }

    /// Moves the oldest block on `src -> dst` into `dst`'s inbox.
    pub fn deliver(&mut self, src: WorkerId, dst: WorkerId) -> bool {
        let delivered = self.net.deliver(src, dst);
        if delivered {
            self.steps += 1;
        }
        delivered
    }

    /// Runs the collective check. Every worker must be paused. Returns true
    /// on termination; otherwise all workers resume.
    pub fn collective_round(&mut self) -> bool {
        assert!(self.all_paused(), "collective check needs every worker at the barrier");
        let counters = self.counters();
        self.done = self.detector.check_global_quiescence(&counters);
        if !self.done {
            self.paused.iter_mut().for_each(|p| *p = false);
        }
        self.done
    }

    /// One randomly chosen scheduler action.
    pub fn random_step(&mut self) -> Result<(), EngineError> {
        if self.done {
            return Ok(());
        }
        if self.all_paused() {
            self.collective_round();
            return Ok(());
        }
        let busy = self.net.num_busy_channels();
        if busy > 0 && self.rng.random_bool(self.deliver_bias) {
            let (src, dst) = self.net.busy_channel(self.rng.random_range(0..busy));
            self.deliver(src, dst);
            return Ok(());
        }
        let w = self.workers.len();
        let rank = loop {
            let r = self.rng.random_range(0..w);
            if !self.paused[r] {
                break r;
            }
        };
        self.step_worker(rank)?;
        Ok(())
    }

    /// Random steps until termination or the step limit.
    pub fn run_until_done(&mut self) -> Result<(), EngineError> {
        while !self.done {
            if self.steps >= self.max_steps {
                return Err(EngineError::StepLimit(self.steps));
            }
            self.random_step()?;
        }
        Ok(())
    }

    pub fn run_to_completion(mut self) -> Result<RunReport, EngineError> {
        self.run_until_done()?;
        self.into_report()
    }

    /// Collects the forest and statistics. Works before termination too,
    /// reporting whatever `Branch` edges exist so far.
    pub fn into_report(self) -> Result<RunReport, EngineError> {
        let totals = Totals {
            wire_mode: self.wire_mode,
            wire_mode_fallback: self.wire_mode_fallback,
            collective_rounds: self.detector.rounds(),
            blocks_sent: self.workers.iter().map(|w| w.counters().sent).sum(),
            elapsed: self.started.elapsed(),
            steps: self.steps,
            trace_digest: Some(self.net.trace_digest()),
            violations: self.monitor.map(|m| m.violations).unwrap_or_default(),
        };
        build_report(self.num_vertices, self.workers, totals)
    }
}

const CONTINUE: u8 = 0;
const DONE: u8 = 1;
const ABORT: u8 = 2;

fn run_threaded(parts: &[LocalGraph], cfg: &EngineConfig) -> Result<RunReport, EngineError> {
    let (workers, wire_mode, wire_mode_fallback) = setup(parts, cfg)?;
    let num_vertices = parts[0].num_global_vertices;
    let n = workers.len();
    let barrier = Barrier::new(n);
    let slots = Mutex::new(vec![(QuiescenceCounters::default(), false); n]);
    let detector = Mutex::new(QuiescenceDetector::new());
    let decision = AtomicU8::new(CONTINUE);
    let start = Instant::now();

    let results: Vec<thread::Result<(Worker, Option<EngineError>)>> = thread::scope(|s| {
        let handles: Vec<_> = workers
            .into_iter()
            .zip(threaded_endpoints(n))
            .enumerate()
            .map(|(rank, (mut w, mut ep))| {
                let (barrier, slots, detector, decision) = (&barrier, &slots, &detector, &decision);
                s.spawn(move || {
                    let mut error = None;
                    loop {
                        let arrived = match &error {
                            Some(_) => true,
                            None => match w.step(&mut ep, start.elapsed().as_nanos() as u64) {
                                Ok(StepOutcome::Collective) => true,
                                Ok(StepOutcome::Idle) => {
                                    thread::yield_now();
                                    false
                                }
                                Ok(StepOutcome::Busy) => false,
                                Err(e) => {
                                    error = Some(e);
                                    true
                                }
                            },
                        };
                        if !arrived {
                            continue;
                        }
                        slots.lock().unwrap()[rank] = (w.counters(), error.is_some());
                        if barrier.wait().is_leader() {
                            let slots = slots.lock().unwrap();
                            let d = if slots.iter().any(|s| s.1) {
                                ABORT
                            } else {
                                let counters: Vec<_> = slots.iter().map(|s| s.0).collect();
                                if detector.lock().unwrap().check_global_quiescence(&counters) {
                                    DONE
                                } else {
                                    CONTINUE
                                }
                            };
                            decision.store(d, Ordering::SeqCst);
                        }
                        barrier.wait();
                        if decision.load(Ordering::SeqCst) != CONTINUE {
                            break;
                        }
                    }
                    (w, error)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });
    let elapsed = start.elapsed();

    let mut workers = Vec::with_capacity(n);
    for r in results {
        let (w, err) = r.map_err(|_| EngineError::WorkerPanic)?;
        if let Some(e) = err {
            return Err(e);
        }
        workers.push(w);
    }
    let totals = Totals {
        wire_mode,
        wire_mode_fallback,
        collective_rounds: detector.into_inner().unwrap().rounds(),
        blocks_sent: workers.iter().map(|w| w.counters().sent).sum(),
        elapsed,
        steps: 0,
        trace_digest: None,
        violations: Vec::new(),
    };
    build_report(num_vertices, workers, totals)
}
