use std::io::{self, Write};
use std::ops::{Add, AddAssign};

use crate::protocol::MessageKind;
use crate::WorkerId;

/// Number of equal time intervals used for block-size statistics.
pub const DEFAULT_INTERVALS: usize = 64;

/// Protocol messages sent, by kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MessageCounts([u64; 7]);

impl MessageCounts {
    pub fn record(&mut self, kind: MessageKind) {
        self.0[kind.code() as usize] += 1;
    }

    pub fn get(&self, kind: MessageKind) -> u64 {
        self.0[kind.code() as usize]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MessageKind, u64)> + '_ {
        MessageKind::ALL.iter().map(move |&k| (k, self.get(k)))
    }
}

impl Add for MessageCounts {
    type Output = MessageCounts;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for MessageCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// One flushed aggregation buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlushRecord {
    /// Nanoseconds since start (threaded) or scheduler step (deterministic).
    pub time: u64,
    pub worker: WorkerId,
    pub bytes: u32,
    pub messages: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalStat {
    pub index: usize,
    /// Mean block size over all workers' flushes in the interval; 0 if none.
    pub avg_bytes: f64,
    pub msgs_sent: u64,
    pub blocks: u64,
}

/// Splits the span from the first to the last flush into `intervals` equal
/// slices and averages block sizes within each.
pub fn interval_stats(flushes: &[FlushRecord], intervals: usize) -> Vec<IntervalStat> {
    assert!(intervals > 0);
    let mut bytes = vec![0u64; intervals];
    let mut msgs = vec![0u64; intervals];
    let mut blocks = vec![0u64; intervals];
    if let (Some(t0), Some(t1)) = (flushes.iter().map(|f| f.time).min(), flushes.iter().map(|f| f.time).max()) {
        let span = (t1 - t0) as f64 + 1.0;
        for f in flushes {
            let i = (((f.time - t0) as f64 / span) * intervals as f64) as usize;
            let i = i.min(intervals - 1);
            bytes[i] += u64::from(f.bytes);
            msgs[i] += u64::from(f.messages);
            blocks[i] += 1;
        }
    }
    (0..intervals)
        .map(|i| IntervalStat {
            index: i,
            avg_bytes: if blocks[i] == 0 { 0.0 } else { bytes[i] as f64 / blocks[i] as f64 },
            msgs_sent: msgs[i],
            blocks: blocks[i],
        })
        .collect()
}

/// CSV with header `interval_index,avg_bytes,msgs_sent`.
pub fn write_interval_csv<W: Write>(out: &mut W, stats: &[IntervalStat]) -> io::Result<()> {
    writeln!(out, "interval_index,avg_bytes,msgs_sent")?;
    for s in stats {
        writeln!(out, "{},{:.3},{}", s.index, s.avg_bytes, s.msgs_sent)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: u64, bytes: u32) -> FlushRecord {
        FlushRecord { time, worker: 0, bytes, messages: bytes / 10 }
    }

    #[test]
    fn intervals_bucket_by_time() {
        let flushes = [rec(0, 100), rec(1, 300), rec(9, 50)];
        let s = interval_stats(&flushes, 2);
        assert_eq!(s[0].avg_bytes, 200.0);
        assert_eq!(s[0].msgs_sent, 40);
        assert_eq!(s[1].avg_bytes, 50.0);
        assert_eq!(s[1].blocks, 1);
    }

    #[test]
    fn empty_input_gives_zero_rows() {
        let s = interval_stats(&[], 4);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|r| r.blocks == 0 && r.avg_bytes == 0.0));
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        write_interval_csv(&mut out, &interval_stats(&[rec(5, 26)], 2)).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "interval_index,avg_bytes,msgs_sent\n0,26.000,2\n1,0.000,0\n");
    }

    #[test]
    fn counts_add_up() {
        let mut a = MessageCounts::default();
        a.record(MessageKind::Test);
        a.record(MessageKind::Test);
        let mut b = MessageCounts::default();
        b.record(MessageKind::Connect);
        let c = a + b;
        assert_eq!(c.total(), 3);
        assert_eq!(c.get(MessageKind::Test), 2);
    }
}
