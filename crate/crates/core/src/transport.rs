//! Block delivery between workers and global quiescence detection.
//!
//! Two networks implement [`Endpoint`]: [`SimNetwork`], a single-threaded
//! network whose deliveries are driven explicitly by a scheduler, and
//! [`threaded_endpoints`], one `mpsc` inbox per worker for thread-per-worker
//! runs. Both deliver blocks exactly once and in send order per
//! `(source, destination)` pair.

use std::collections::VecDeque;
use std::sync::mpsc;

use sha2::{Digest, Sha256};

use crate::WorkerId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("destination worker {dst} out of range (have {num_workers})")]
    NoSuchWorker { dst: WorkerId, num_workers: usize },
    #[error("worker {0} hung up")]
    Disconnected(WorkerId),
}

/// A flushed aggregation buffer together with its sender.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub src: WorkerId,
    pub bytes: Vec<u8>,
}

/// A worker's view of the network.
pub trait Endpoint {
    fn rank(&self) -> WorkerId;

    fn num_workers(&self) -> usize;

    /// Queues `bytes` for `dst`. Delivery happens later, after every earlier
    /// block from this worker to `dst`.
    fn send_block(&mut self, dst: WorkerId, bytes: Vec<u8>) -> Result<(), TransportError>;

    /// Non-blocking: takes every block delivered to this worker so far.
    fn poll_receive(&mut self) -> Vec<Block>;
}

/// In-memory network for the deterministic simulator.
///
/// Sent blocks sit in a per-pair channel until [`SimNetwork::deliver`] moves
/// the head of that channel into the destination's inbox; the worker then
/// picks it up with [`Endpoint::poll_receive`].
#[derive(Debug)]
pub struct SimNetwork {
    num_workers: usize,
    channels: Vec<VecDeque<Vec<u8>>>,
    inboxes: Vec<Vec<Block>>,
    /// Indices of non-empty channels, for O(1) random choice.
    active: Vec<usize>,
    active_pos: Vec<Option<usize>>,
    trace: Sha256,
    deliveries: u64,
}

impl SimNetwork {
    pub fn new(num_workers: usize) -> Self {
        let pairs = num_workers * num_workers;
        SimNetwork {
            num_workers,
            channels: vec![VecDeque::new(); pairs],
            inboxes: vec![Vec::new(); num_workers],
            active: Vec::new(),
            active_pos: vec![None; pairs],
            trace: Sha256::new(),
            deliveries: 0,
        }
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    pub fn endpoint(&mut self, rank: WorkerId) -> SimEndpoint<'_> {
        assert!(rank < self.num_workers);
        SimEndpoint { rank, net: self }
    }

    /// Blocks sent but not yet moved into an inbox.
    pub fn in_flight(&self) -> usize {
        self.channels.iter().map(VecDeque::len).sum()
    }

    /// Blocks delivered but not yet polled.
    pub fn undelivered_to_worker(&self, rank: WorkerId) -> usize {
        self.inboxes[rank].len()
    }

    /// `(src, dst)` pairs that currently hold blocks.
    pub fn busy_channels(&self) -> impl Iterator<Item = (WorkerId, WorkerId)> + '_ {
        self.active.iter().map(|&c| (c / self.num_workers, c % self.num_workers))
    }

    pub fn num_busy_channels(&self) -> usize {
        self.active.len()
    }

    /// The `i`-th busy channel in internal order; used for seeded random choice.
    pub fn busy_channel(&self, i: usize) -> (WorkerId, WorkerId) {
        let c = self.active[i];
        (c / self.num_workers, c % self.num_workers)
    }

    fn push(&mut self, src: WorkerId, dst: WorkerId, bytes: Vec<u8>) {
        let c = src * self.num_workers + dst;
        self.channels[c].push_back(bytes);
        if self.active_pos[c].is_none() {
            self.active_pos[c] = Some(self.active.len());
            self.active.push(c);
        }
    }

    /// Moves the oldest block of channel `src -> dst` into `dst`'s inbox.
    /// Returns false if the channel is empty.
    pub fn deliver(&mut self, src: WorkerId, dst: WorkerId) -> bool {
        let c = src * self.num_workers + dst;
        let Some(bytes) = self.channels[c].pop_front() else {
            return false;
        };
        if self.channels[c].is_empty() {
            let pos = self.active_pos[c].take().expect("busy channel is tracked");
            self.active.swap_remove(pos);
            if let Some(&moved) = self.active.get(pos) {
                self.active_pos[moved] = Some(pos);
            }
        }
        self.trace.update((src as u64).to_le_bytes());
        self.trace.update((dst as u64).to_le_bytes());
        self.trace.update((bytes.len() as u64).to_le_bytes());
        self.trace.update(&bytes);
        self.deliveries += 1;
        self.inboxes[dst].push(Block { src, bytes });
        true
    }

    pub fn deliveries(&self) -> u64 {
        self.deliveries
    }

    /// Hex SHA-256 over every delivery so far (source, destination, bytes).
    pub fn trace_digest(&self) -> String {
        self.trace.clone().finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub struct SimEndpoint<'a> {
    rank: WorkerId,
    net: &'a mut SimNetwork,
}

impl Endpoint for SimEndpoint<'_> {
    fn rank(&self) -> WorkerId {
        self.rank
    }

    fn num_workers(&self) -> usize {
        self.net.num_workers
    }

    fn send_block(&mut self, dst: WorkerId, bytes: Vec<u8>) -> Result<(), TransportError> {
        if dst >= self.net.num_workers {
            return Err(TransportError::NoSuchWorker { dst, num_workers: self.net.num_workers });
        }
        self.net.push(self.rank, dst, bytes);
        Ok(())
    }

    fn poll_receive(&mut self) -> Vec<Block> {
        std::mem::take(&mut self.net.inboxes[self.rank])
    }
}

/// Endpoint of the thread-per-worker network.
pub struct ThreadEndpoint {
    rank: WorkerId,
    outboxes: Vec<mpsc::Sender<Block>>,
    inbox: mpsc::Receiver<Block>,
}

/// One connected endpoint per worker. Each worker's inbox is an `mpsc`
/// channel; a single sender's blocks keep their order.
pub fn threaded_endpoints(num_workers: usize) -> Vec<ThreadEndpoint> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..num_workers).map(|_| mpsc::channel()).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| ThreadEndpoint { rank, outboxes: senders.clone(), inbox })
        .collect()
}

impl Endpoint for ThreadEndpoint {
    fn rank(&self) -> WorkerId {
        self.rank
    }

    fn num_workers(&self) -> usize {
        self.outboxes.len()
    }

    fn send_block(&mut self, dst: WorkerId, bytes: Vec<u8>) -> Result<(), TransportError> {
        let tx = self
            .outboxes
            .get(dst)
            .ok_or(TransportError::NoSuchWorker { dst, num_workers: self.outboxes.len() })?;
        tx.send(Block { src: self.rank, bytes }).map_err(|_| TransportError::Disconnected(dst))
    }

    fn poll_receive(&mut self) -> Vec<Block> {
        self.inbox.try_iter().collect()
    }
}

/// What one worker contributes to a collective quiescence check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QuiescenceCounters {
    /// Blocks this worker has handed to the transport.
    pub sent: u64,
    /// Blocks this worker has taken out of the transport.
    pub received: u64,
    /// No deferred messages and no unflushed buffers.
    pub queues_empty: bool,
}

/// Double-round termination check.
///
/// A round passes when every worker's queues are empty and the global sent
/// and received counts agree. Termination is declared only when two
/// consecutive rounds pass with identical counts; a single clean round can be
/// an artifact of counters sampled at different moments.
#[derive(Clone, Debug, Default)]
pub struct QuiescenceDetector {
    previous: Option<(u64, u64)>,
    rounds: u64,
}

impl QuiescenceDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Runs one collective round over all workers' counters.
    pub fn check_global_quiescence(&mut self, counters: &[QuiescenceCounters]) -> bool {
        self.rounds += 1;
        let sent: u64 = counters.iter().map(|c| c.sent).sum();
        let received: u64 = counters.iter().map(|c| c.received).sum();
        let clean = sent == received && counters.iter().all(|c| c.queues_empty);
        let current = clean.then_some((sent, received));
        let done = current.is_some() && current == self.previous;
        self.previous = current;
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_fifo_per_pair() {
        let mut net = SimNetwork::new(2);
        net.endpoint(0).send_block(1, b"A".to_vec()).unwrap();
        net.endpoint(0).send_block(1, b"B".to_vec()).unwrap();
        assert_eq!(net.in_flight(), 2);
        assert!(net.endpoint(1).poll_receive().is_empty());
        assert!(net.deliver(0, 1));
        assert!(net.deliver(0, 1));
        assert!(!net.deliver(0, 1));
        let got: Vec<_> = net.endpoint(1).poll_receive().into_iter().map(|b| b.bytes).collect();
        assert_eq!(got, vec![b"A".to_vec(), b"B".to_vec()]);
    }

    #[test]
    fn self_send_reaches_own_inbox() {
        let mut net = SimNetwork::new(1);
        net.endpoint(0).send_block(0, vec![7]).unwrap();
        net.deliver(0, 0);
        assert_eq!(net.endpoint(0).poll_receive(), vec![Block { src: 0, bytes: vec![7] }]);
    }

    #[test]
    fn out_of_range_destination() {
        let mut net = SimNetwork::new(2);
        assert_eq!(
            net.endpoint(0).send_block(2, vec![]),
            Err(TransportError::NoSuchWorker { dst: 2, num_workers: 2 })
        );
        let mut eps = threaded_endpoints(2);
        assert!(eps[0].send_block(5, vec![]).is_err());
    }

    #[test]
    fn busy_channel_bookkeeping() {
        let mut net = SimNetwork::new(3);
        net.endpoint(0).send_block(1, vec![1]).unwrap();
        net.endpoint(2).send_block(1, vec![2]).unwrap();
        net.endpoint(1).send_block(0, vec![3]).unwrap();
        assert_eq!(net.num_busy_channels(), 3);
        net.deliver(0, 1);
        assert_eq!(net.num_busy_channels(), 2);
        let mut busy: Vec<_> = net.busy_channels().collect();
        busy.sort();
        assert_eq!(busy, vec![(1, 0), (2, 1)]);
        while net.num_busy_channels() > 0 {
            let (s, d) = net.busy_channel(0);
            net.deliver(s, d);
        }
        assert_eq!(net.in_flight(), 0);
    }

    #[test]
    fn threaded_nothing_sent_is_empty() {
        let mut eps = threaded_endpoints(2);
        assert!(eps[1].poll_receive().is_empty());
        eps[0].send_block(1, vec![1]).unwrap();
        eps[0].send_block(1, vec![2]).unwrap();
        let got = eps[1].poll_receive();
        assert_eq!(got.iter().map(|b| b.bytes[0]).collect::<Vec<_>>(), vec![1, 2]);
    }

    fn idle(sent: u64, received: u64) -> QuiescenceCounters {
        QuiescenceCounters { sent, received, queues_empty: true }
    }

    #[test]
    fn all_zero_counters_need_two_rounds() {
        let mut d = QuiescenceDetector::new();
        let c = [idle(0, 0), idle(0, 0)];
        assert!(!d.check_global_quiescence(&c));
        assert!(d.check_global_quiescence(&c));
    }

    #[test]
    fn unbalanced_counts_never_quiesce() {
        let mut d = QuiescenceDetector::new();
        let c = [idle(10, 4), idle(0, 5)];
        for _ in 0..5 {
            assert!(!d.check_global_quiescence(&c));
        }
    }

    #[test]
    fn busy_queue_blocks_termination() {
        let mut d = QuiescenceDetector::new();
        let busy = [idle(3, 3), QuiescenceCounters { sent: 0, received: 0, queues_empty: false }];
        assert!(!d.check_global_quiescence(&busy));
        assert!(!d.check_global_quiescence(&busy));
    }

    #[test]
    fn changed_sums_between_rounds_reset() {
        let mut d = QuiescenceDetector::new();
        assert!(!d.check_global_quiescence(&[idle(2, 2)]));
        // Work happened in between: balanced again but with new totals.
        assert!(!d.check_global_quiescence(&[idle(5, 5)]));
        assert!(d.check_global_quiescence(&[idle(5, 5)]));
    }
}
