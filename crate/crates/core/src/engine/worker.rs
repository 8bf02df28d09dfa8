use std::collections::VecDeque;

use super::stats::{FlushRecord, MessageCounts};
use super::{AcceptBranching, EngineConfig, EngineError};
use crate::edge_index::{build_edge_index, EdgeIndexTable};
use crate::graph::{Edge, EdgeState, LocalGraph};
use crate::protocol::{decode_block, AggregationBuffer, Message, MessageKind, WireMode};
use crate::transport::{Endpoint, QuiescenceCounters};
use crate::weights::{compress_weight, WeightKey};
use crate::{VertexId, WorkerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Sleeping,
    Find,
    Found,
}

/// Per-vertex protocol state.
#[derive(Clone, Debug)]
pub struct VertexState {
    pub node_state: NodeState,
    pub level: u8,
    /// Weight of the fragment's core edge. Meaningless at level 0.
    pub identity: WeightKey,
    /// CSR slot toward the best outgoing edge found so far.
    pub best_edge: Option<usize>,
    pub best_weight: WeightKey,
    pub test_edge: Option<usize>,
    /// CSR slot toward the core.
    pub in_branch: Option<usize>,
    /// Subtree reports still outstanding.
    pub find_count: u32,
    /// Every slot of the row before this one is non-`Basic`.
    next_basic: usize,
}

impl VertexState {
    fn new(row_start: usize) -> Self {
        VertexState {
            node_state: NodeState::Sleeping,
            level: 0,
            identity: WeightKey::INFINITY,
            best_edge: None,
            best_weight: WeightKey::INFINITY,
            test_edge: None,
            in_branch: None,
            find_count: 0,
            next_basic: row_start,
        }
    }
}

/// State transitions reported to the simulator's invariant monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum EngineEvent {
    Branched { u: VertexId, v: VertexId },
    LevelChanged { vertex: VertexId, from: u8, to: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Handled {
    Done,
    Deferred,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StepOutcome {
    /// Nothing arrived and no deferred message made progress.
    Idle,
    Busy,
    /// Reached a collective quiescence check; must not step again until the
    /// check has run.
    Collective,
}

pub(crate) struct Worker {
    rank: WorkerId,
    first: VertexId,
    block_size: usize,
    mode: WireMode,
    accept_branching: AcceptBranching,
    sending_frequency: u64,
    check_frequency: u64,
    quiescence_interval: u64,

    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    keys: Vec<WeightKey>,
    states: Vec<EdgeState>,
    index: EdgeIndexTable,
    vertices: Vec<VertexState>,

    main_queue: VecDeque<Message>,
    test_queue: VecDeque<Message>,
    buffers: Vec<AggregationBuffer>,
    outbox: Vec<(WorkerId, Vec<u8>)>,

    started: bool,
    iteration: u64,
    now: u64,
    sent_blocks: u64,
    received_blocks: u64,
    bytes_sent: u64,
    messages: MessageCounts,
    flushes: Vec<FlushRecord>,
    halted_cores: u64,
    /// Set when a level rises, an edge turns `Branch`, or a vertex leaves
    /// `Find`: the only changes that can unblock a main-queue message.
    unblocked: bool,
    /// First-time deferrals: `[main queue, test queue]`.
    deferrals: [u64; 2],
    events: Option<Vec<EngineEvent>>,
}

impl Worker {
    pub fn new(g: &LocalGraph, cfg: &EngineConfig, mode: WireMode) -> Result<Self, EngineError> {
        let keys = g
            .entries()
            .map(|(_, v, ew)| match mode {
                WireMode::Wide => ew.key(),
                WireMode::Compressed => compress_weight(ew, (g.worker_rank, g.owner_of(v))).key(),
            })
            .collect();
        let index = build_edge_index(g, cfg.hash_table_size.resolve(g.num_local_edges()))?;
        let vertices = g.row_offsets[..g.num_local_vertices()].iter().map(|&s| VertexState::new(s)).collect();
        Ok(Worker {
            rank: g.worker_rank,
            first: g.vertex_range.start,
            block_size: g.block_size,
            mode,
            accept_branching: cfg.accept_branching,
            sending_frequency: cfg.sending_frequency,
            check_frequency: cfg.check_frequency,
            quiescence_interval: cfg.quiescence_interval,
            offsets: g.row_offsets.clone(),
            targets: g.col_targets.clone(),
            keys,
            states: g.edge_states.clone(),
            index,
            vertices,
            main_queue: VecDeque::new(),
            test_queue: VecDeque::new(),
            buffers: (0..g.num_workers).map(|d| AggregationBuffer::new(d, cfg.max_msg_size, mode)).collect(),
            outbox: Vec::new(),
            started: false,
            iteration: 0,
            now: 0,
            sent_blocks: 0,
            received_blocks: 0,
            bytes_sent: 0,
            messages: MessageCounts::default(),
            flushes: Vec::new(),
            halted_cores: 0,
            unblocked: false,
            deferrals: [0; 2],
            events: cfg.check_invariants.then(Vec::new),
        })
    }

    /// One iteration of the worker loop.
    pub fn step(&mut self, net: &mut impl Endpoint, now: u64) -> Result<StepOutcome, EngineError> {
        self.now = now;
        let mut busy = false;
        if !self.started {
            self.started = true;
            self.wake_all()?;
            busy = true;
        }
        self.iteration += 1;

        for block in net.poll_receive() {
            busy = true;
            self.received_blocks += 1;
            let msgs =
                decode_block(&block.bytes, self.mode).map_err(|source| EngineError::Wire { worker: self.rank, source })?;
            for m in msgs {
                if self.handle(&m)? == Handled::Deferred {
                    self.deferrals[usize::from(m.kind == MessageKind::Test)] += 1;
                    self.defer(m);
                }
                // A later message on the same edge must not overtake a
                // deferred one that has just become processable.
                self.rescan_main()?;
            }
        }

        busy |= self.retry(false)?;
        self.rescan_main()?;
        if self.iteration % self.check_frequency == 0 {
            busy |= self.retry(true)?;
        }
        if self.iteration % self.sending_frequency == 0 {
            self.flush_all();
        }
        self.drain(net)?;

        if self.iteration % self.quiescence_interval == 0 {
            self.flush_all();
            self.drain(net)?;
            return Ok(StepOutcome::Collective);
        }
        Ok(if busy { StepOutcome::Busy } else { StepOutcome::Idle })
    }

    pub fn counters(&self) -> QuiescenceCounters {
        QuiescenceCounters {
            sent: self.sent_blocks,
            received: self.received_blocks,
            queues_empty: self.main_queue.is_empty()
                && self.test_queue.is_empty()
                && self.outbox.is_empty()
                && self.buffers.iter().all(AggregationBuffer::is_empty),
        }
    }

    // ---- accessors used by the drivers ----

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn messages(&self) -> MessageCounts {
        self.messages
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    pub fn halted_cores(&self) -> u64 {
        self.halted_cores
    }

    pub fn deferrals(&self) -> [u64; 2] {
        self.deferrals
    }

    pub fn deferred(&self) -> impl Iterator<Item = &Message> {
        self.main_queue.iter().chain(&self.test_queue)
    }

    pub fn take_flushes(&mut self) -> Vec<FlushRecord> {
        std::mem::take(&mut self.flushes)
    }

    pub fn drain_events(&mut self) -> Vec<EngineEvent> {
        self.events.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn owns(&self, v: VertexId) -> bool {
        v >= self.first && ((v - self.first) as usize) < self.vertices.len()
    }

    pub fn vertex_state(&self, v: VertexId) -> Option<&VertexState> {
        self.local(v).map(|i| &self.vertices[i])
    }

    /// State of edge `(u, v)` as recorded at `u`, which must be local.
    pub fn edge_state(&self, u: VertexId, v: VertexId) -> Option<EdgeState> {
        self.index.lookup(v, u).map(|j| self.states[j])
    }

    /// Every local `Branch` edge, with its raw weight.
    pub fn branch_edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for v in 0..self.vertices.len() {
            for j in self.row(v) {
                if self.states[j] == EdgeState::Branch {
                    out.push(Edge::new(self.global(v), self.targets[j], self.keys[j].w));
                }
            }
        }
        out
    }

    // ---- helpers ----

    fn local(&self, v: VertexId) -> Option<usize> {
        self.owns(v).then(|| (v - self.first) as usize)
    }

    fn global(&self, local: usize) -> VertexId {
        self.first + local as VertexId
    }

    fn row(&self, local: usize) -> std::ops::Range<usize> {
        self.offsets[local]..self.offsets[local + 1]
    }

    fn violation(&self, m: &Message, detail: impl Into<String>) -> EngineError {
        EngineError::Protocol { worker: self.rank, vertex: m.dst, peer: m.src, kind: m.kind, detail: detail.into() }
    }

    fn internal(&self, v: usize, kind: MessageKind, detail: &str) -> EngineError {
        EngineError::Protocol {
            worker: self.rank,
            vertex: self.global(v),
            peer: self.global(v),
            kind,
            detail: detail.to_string(),
        }
    }

    fn record(&mut self, ev: EngineEvent) {
        if let Some(events) = self.events.as_mut() {
            events.push(ev);
        }
    }

    fn set_branch(&mut self, v: usize, j: usize) {
        if self.states[j] != EdgeState::Branch {
            self.states[j] = EdgeState::Branch;
            self.unblocked = true;
            let (u, t) = (self.global(v), self.targets[j]);
            self.record(EngineEvent::Branched { u, v: t });
        }
    }

    fn set_level(&mut self, v: usize, level: u8) {
        let from = self.vertices[v].level;
        if from != level {
            self.vertices[v].level = level;
            self.unblocked = true;
            let vertex = self.global(v);
            self.record(EngineEvent::LevelChanged { vertex, from, to: level });
        }
    }

    fn defer(&mut self, m: Message) {
        if m.kind == MessageKind::Test {
            self.test_queue.push_back(m);
        } else {
            self.main_queue.push_back(m);
        }
    }

    /// One pass over a deferral queue. Returns true if anything was handled.
    fn retry(&mut self, tests: bool) -> Result<bool, EngineError> {
        let queue = if tests { &mut self.test_queue } else { &mut self.main_queue };
        if queue.is_empty() {
            return Ok(false);
        }
        let pending = std::mem::take(queue);
        let mut progressed = false;
        for m in pending {
            match self.handle(&m)? {
                Handled::Done => progressed = true,
                Handled::Deferred => self.defer(m),
            }
        }
        Ok(progressed)
    }

    fn rescan_main(&mut self) -> Result<(), EngineError> {
        while std::mem::take(&mut self.unblocked) {
            self.retry(false)?;
        }
        Ok(())
    }

    fn send(&mut self, m: Message) -> Result<(), EngineError> {
        let dest = m.dst as usize / self.block_size;
        self.messages.record(m.kind);
        let full = self.buffers[dest].push(&m).map_err(|source| EngineError::Wire { worker: self.rank, source })?;
        if full {
            self.flush_buffer(dest);
        }
        Ok(())
    }

    fn send_on(&mut self, v: usize, j: usize, build: impl FnOnce(VertexId, VertexId) -> Message) -> Result<(), EngineError> {
        let m = build(self.global(v), self.targets[j]);
        self.send(m)
    }

    fn flush_buffer(&mut self, dest: WorkerId) {
        let buf = &mut self.buffers[dest];
        if buf.is_empty() {
            return;
        }
        let (bytes, count) = buf.flush();
        self.flushes.push(FlushRecord {
            time: self.now,
            worker: self.rank,
            bytes: bytes.len() as u32,
            messages: count as u32,
        });
        self.outbox.push((dest, bytes));
    }

    fn flush_all(&mut self) {
        for d in 0..self.buffers.len() {
            self.flush_buffer(d);
        }
    }

    fn drain(&mut self, net: &mut impl Endpoint) -> Result<(), EngineError> {
        for (dest, bytes) in self.outbox.drain(..) {
            self.bytes_sent += bytes.len() as u64;
            self.sent_blocks += 1;
            net.send_block(dest, bytes)?;
        }
        Ok(())
    }

    // ---- the automaton ----

    fn wake_all(&mut self) -> Result<(), EngineError> {
        for v in 0..self.vertices.len() {
            let row = self.row(v);
            let vs = &mut self.vertices[v];
            vs.node_state = NodeState::Found;
            vs.find_count = 0;
            if row.is_empty() {
                continue;
            }
            // Rows are sorted, so the first slot is the lightest edge.
            let j = row.start;
            self.set_branch(v, j);
            self.send_on(v, j, |s, d| Message::connect(s, d, 0))?;
        }
        Ok(())
    }

    fn handle(&mut self, m: &Message) -> Result<Handled, EngineError> {
        let v = self.local(m.dst).ok_or_else(|| self.violation(m, "receiver not owned by this worker"))?;
        let j = self.index.lookup(m.src, m.dst).ok_or_else(|| self.violation(m, "no such edge"))?;
        match m.kind {
            MessageKind::Connect => Ok(self.on_connect(v, j, m.level)?),
            MessageKind::Initiate => {
                self.on_initiate(v, j, m.level, m.weight(), m.state_flag)?;
                Ok(Handled::Done)
            }
            MessageKind::Test => self.on_test(v, j, m.level, m.weight()),
            MessageKind::Accept => {
                if self.vertices[v].test_edge != Some(j) {
                    return Err(self.violation(m, "Accept on an edge that is not being tested"));
                }
                self.on_accept(v, j)?;
                Ok(Handled::Done)
            }
            MessageKind::Reject => {
                if self.vertices[v].test_edge != Some(j) {
                    return Err(self.violation(m, "Reject on an edge that is not being tested"));
                }
                self.on_reject(v, j)?;
                Ok(Handled::Done)
            }
            MessageKind::Report => {
                let vs = &self.vertices[v];
                if vs.in_branch != Some(j) && vs.find_count == 0 {
                    return Err(self.violation(m, "subtree Report with no report outstanding"));
                }
                self.on_report(v, j, m.weight())
            }
            MessageKind::ChangeCore => {
                self.change_core(v)?;
                Ok(Handled::Done)
            }
        }
    }

    fn on_connect(&mut self, v: usize, j: usize, level: u8) -> Result<Handled, EngineError> {
        let vs = &self.vertices[v];
        let (own_level, identity, state) = (vs.level, vs.identity, vs.node_state);
        if level < own_level {
            // Absorb the lower-level fragment.
            self.set_branch(v, j);
            let find = state == NodeState::Find;
            if find {
                self.vertices[v].find_count += 1;
            }
            self.send_on(v, j, |s, d| Message::initiate(s, d, own_level, identity, find))?;
            Ok(Handled::Done)
        } else if self.states[j] == EdgeState::Basic {
            Ok(Handled::Deferred)
        } else {
            // Both sides sent Connect over this edge: it becomes the core.
            let core = self.keys[j];
            self.send_on(v, j, |s, d| Message::initiate(s, d, own_level + 1, core, true))?;
            Ok(Handled::Done)
        }
    }

    fn on_initiate(&mut self, v: usize, j: usize, level: u8, identity: WeightKey, find: bool) -> Result<(), EngineError> {
        self.set_level(v, level);
        let vs = &mut self.vertices[v];
        vs.identity = identity;
        vs.node_state = if find { NodeState::Find } else { NodeState::Found };
        vs.in_branch = Some(j);
        vs.best_edge = None;
        vs.best_weight = WeightKey::INFINITY;
        for i in self.row(v) {
            if i != j && self.states[i] == EdgeState::Branch {
                self.send_on(v, i, |s, d| Message::initiate(s, d, level, identity, find))?;
                if find {
                    self.vertices[v].find_count += 1;
                }
            }
        }
        if find {
            self.test(v)?;
        }
        Ok(())
    }

    /// Probe the lightest remaining `Basic` edge, or report if none is left.
    fn test(&mut self, v: usize) -> Result<(), EngineError> {
        let end = self.offsets[v + 1];
        let mut c = self.vertices[v].next_basic;
        while c < end && self.states[c] != EdgeState::Basic {
            c += 1;
        }
        self.vertices[v].next_basic = c;
        if c < end {
            self.vertices[v].test_edge = Some(c);
            let (level, identity) = (self.vertices[v].level, self.vertices[v].identity);
            self.send_on(v, c, |s, d| Message::test(s, d, level, identity))
        } else {
            self.vertices[v].test_edge = None;
            self.report(v)
        }
    }

    fn on_test(&mut self, v: usize, j: usize, level: u8, identity: WeightKey) -> Result<Handled, EngineError> {
        let vs = &self.vertices[v];
        if level > vs.level {
            return Ok(Handled::Deferred);
        }
        if identity != vs.identity {
            self.send_on(v, j, Message::accept)?;
            return Ok(Handled::Done);
        }
        let testing_here = vs.test_edge == Some(j);
        if self.states[j] == EdgeState::Basic {
            self.states[j] = EdgeState::Rejected;
        }
        if testing_here {
            // Our own Test crossed this one; it serves as the rejection.
            self.test(v)?;
        } else {
            self.send_on(v, j, Message::reject)?;
        }
        Ok(Handled::Done)
    }

    fn on_accept(&mut self, v: usize, j: usize) -> Result<(), EngineError> {
        let vs = &mut self.vertices[v];
        vs.test_edge = None;
        if self.keys[j] < vs.best_weight {
            vs.best_weight = self.keys[j];
            vs.best_edge = Some(j);
        }
        if self.accept_branching == AcceptBranching::OnAccept {
            self.set_branch(v, j);
        }
        self.report(v)
    }

    fn on_reject(&mut self, v: usize, j: usize) -> Result<(), EngineError> {
        if self.states[j] == EdgeState::Basic {
            self.states[j] = EdgeState::Rejected;
        }
        self.test(v)
    }

    fn report(&mut self, v: usize) -> Result<(), EngineError> {
        let vs = &self.vertices[v];
        if vs.find_count != 0 || vs.test_edge.is_some() {
            return Ok(());
        }
        let parent =
            vs.in_branch.ok_or_else(|| self.internal(v, MessageKind::Report, "report with no path to the core"))?;
        let best = vs.best_weight;
        self.vertices[v].node_state = NodeState::Found;
        self.unblocked = true;
        self.send_on(v, parent, |s, d| Message::report(s, d, best))
    }

    fn on_report(&mut self, v: usize, j: usize, w: WeightKey) -> Result<Handled, EngineError> {
        let vs = &mut self.vertices[v];
        if vs.in_branch != Some(j) {
            vs.find_count -= 1;
            if w < vs.best_weight {
                vs.best_weight = w;
                vs.best_edge = Some(j);
            }
            self.report(v)?;
            return Ok(Handled::Done);
        }
        // Report from the other core vertex.
        if vs.node_state == NodeState::Find {
            return Ok(Handled::Deferred);
        }
        if w > vs.best_weight {
            self.change_core(v)?;
        } else if w == vs.best_weight && w.is_infinite() {
            self.halted_cores += 1;
        }
        Ok(Handled::Done)
    }

    /// Walk toward the fragment's best outgoing edge; connect over it once
    /// reached.
    fn change_core(&mut self, v: usize) -> Result<(), EngineError> {
        let j = self.vertices[v]
            .best_edge
            .ok_or_else(|| self.internal(v, MessageKind::ChangeCore, "no best edge to move the core toward"))?;
        if self.states[j] == EdgeState::Branch {
            self.send_on(v, j, Message::change_core)
        } else {
            let level = self.vertices[v].level;
            self.send_on(v, j, |s, d| Message::connect(s, d, level))?;
            self.set_branch(v, j);
            Ok(())
        }
    }
}
