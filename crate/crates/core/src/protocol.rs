//! Protocol messages, their bit-packed wire encoding, and per-destination
//! aggregation buffers.
//!
//! Every message starts with a 16-bit header, most significant bit first:
//!
//! ```text
//! | kind:3 | level:5 | state:1 | padding:7 |
//! ```
//!
//! followed by the 32-bit sender and receiver vertex ids. Short kinds
//! (`Connect`, `Accept`, `Reject`, `ChangeCore`) stop there: 80 bits. Long
//! kinds (`Initiate`, `Test`, `Report`) append the 64-bit raw weight and a
//! tie-breaker: 8 bits of owner rank in compressed mode (152 bits total) or
//! the 64-bit special id in wide mode (208 bits total).
//!
//! An infinite `Report` weight is the `+inf` bit pattern with an all-ones
//! tie field.
//!
//! Within a flushed block messages are packed back to back at bit
//! granularity; the block is zero-padded to a whole byte at the end.

use std::fmt;

use crate::weights::WeightKey;
use crate::VertexId;

pub const HEADER_BITS: usize = 16;
pub const SHORT_BITS: usize = 80;
pub const COMPRESSED_LONG_BITS: usize = 152;
pub const WIDE_LONG_BITS: usize = 208;
/// Compressed mode has 8 bits for the tie rank.
pub const MAX_COMPRESSED_WORKERS: usize = 256;
pub const MAX_LEVEL: u8 = 31;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("unknown message kind code {0}")]
    UnknownKind(u8),
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("level {0} does not fit in 5 bits")]
    LevelOverflow(u8),
    #[error("{0:?} must carry a weight")]
    MissingWeight(MessageKind),
    #[error("{0:?} must not carry a weight")]
    UnexpectedWeight(MessageKind),
    #[error("tie rank {0} does not fit the 8-bit compressed field")]
    TieRankOverflow(u64),
    #[error("unknown wire mode byte {0}")]
    UnknownMode(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageKind {
    Connect = 0,
    Initiate = 1,
    Test = 2,
    Accept = 3,
    Reject = 4,
    Report = 5,
    ChangeCore = 6,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::Connect,
        MessageKind::Initiate,
        MessageKind::Test,
        MessageKind::Accept,
        MessageKind::Reject,
        MessageKind::Report,
        MessageKind::ChangeCore,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, ProtocolError> {
        Self::ALL.get(code as usize).copied().ok_or(ProtocolError::UnknownKind(code))
    }

    /// Long kinds carry a weight.
    pub fn is_long(self) -> bool {
        matches!(self, MessageKind::Initiate | MessageKind::Test | MessageKind::Report)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Connect => "Connect",
            MessageKind::Initiate => "Initiate",
            MessageKind::Test => "Test",
            MessageKind::Accept => "Accept",
            MessageKind::Reject => "Reject",
            MessageKind::Report => "Report",
            MessageKind::ChangeCore => "ChangeCore",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How long messages encode their weight tie-breaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WireMode {
    /// 8-bit owner rank; 152-bit long messages.
    Compressed,
    /// 64-bit endpoint special id; 208-bit long messages.
    Wide,
}

impl WireMode {
    /// The one-byte flag exchanged at startup.
    pub fn to_byte(self) -> u8 {
        match self {
            WireMode::Compressed => 1,
            WireMode::Wide => 0,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, ProtocolError> {
        match b {
            1 => Ok(WireMode::Compressed),
            0 => Ok(WireMode::Wide),
            other => Err(ProtocolError::UnknownMode(other)),
        }
    }

    pub fn long_bits(self) -> usize {
        match self {
            WireMode::Compressed => COMPRESSED_LONG_BITS,
            WireMode::Wide => WIDE_LONG_BITS,
        }
    }

    pub fn encoded_bits(self, kind: MessageKind) -> usize {
        if kind.is_long() {
            self.long_bits()
        } else {
            SHORT_BITS
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub src: VertexId,
    pub dst: VertexId,
    pub level: u8,
    /// Only meaningful for `Initiate`: set when the fragment is in `Find`.
    pub state_flag: bool,
    pub weight: Option<WeightKey>,
}

impl Message {
    fn short(kind: MessageKind, src: VertexId, dst: VertexId, level: u8) -> Self {
        Message { kind, src, dst, level, state_flag: false, weight: None }
    }

    pub fn connect(src: VertexId, dst: VertexId, level: u8) -> Self {
        Self::short(MessageKind::Connect, src, dst, level)
    }

    pub fn initiate(src: VertexId, dst: VertexId, level: u8, identity: WeightKey, find: bool) -> Self {
        Message { kind: MessageKind::Initiate, src, dst, level, state_flag: find, weight: Some(identity) }
    }

    pub fn test(src: VertexId, dst: VertexId, level: u8, identity: WeightKey) -> Self {
        Message { kind: MessageKind::Test, src, dst, level, state_flag: false, weight: Some(identity) }
    }

    pub fn accept(src: VertexId, dst: VertexId) -> Self {
        Self::short(MessageKind::Accept, src, dst, 0)
    }

    pub fn reject(src: VertexId, dst: VertexId) -> Self {
        Self::short(MessageKind::Reject, src, dst, 0)
    }

    pub fn report(src: VertexId, dst: VertexId, best: WeightKey) -> Self {
        Message { kind: MessageKind::Report, src, dst, level: 0, state_flag: false, weight: Some(best) }
    }

    pub fn change_core(src: VertexId, dst: VertexId) -> Self {
        Self::short(MessageKind::ChangeCore, src, dst, 0)
    }

    /// Weight of a long message. Panics on short kinds.
    pub fn weight(&self) -> WeightKey {
        self.weight.unwrap_or_else(|| panic!("{} carries no weight", self.kind))
    }
}

/// A bit string, most significant bit of each byte first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Self {
        assert!(len <= bytes.len() * 8);
        BitString { bytes, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.bytes[i / 8] ^= 0x80 >> (i % 8);
    }
}

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_bytes(n: usize) -> Self {
        BitWriter { bytes: Vec::with_capacity(n), len: 0 }
    }

    pub fn len_bits(&self) -> usize {
        self.len
    }

    pub fn len_bytes(&self) -> usize {
        self.bytes.len()
    }

    /// Appends the low `nbits` of `value`, most significant first.
    pub fn write(&mut self, value: u64, nbits: usize) {
        debug_assert!(nbits <= 64);
        debug_assert!(nbits == 64 || value >> nbits == 0);
        let mut remaining = nbits;
        while remaining > 0 {
            let used = self.len % 8;
            if used == 0 {
                self.bytes.push(0);
            }
            let room = 8 - used;
            let take = room.min(remaining);
            let chunk = ((value >> (remaining - take)) & ((1u64 << take) - 1)) as u8;
            *self.bytes.last_mut().unwrap() |= chunk << (room - take);
            self.len += take;
            remaining -= take;
        }
    }

    pub fn finish(self) -> BitString {
        BitString { bytes: self.bytes, len: self.len }
    }

    /// Takes the contents, byte-padded, and resets the writer.
    pub fn take_bytes(&mut self) -> Vec<u8> {
        self.len = 0;
        std::mem::take(&mut self.bytes)
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    len: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len_bits: usize) -> Self {
        assert!(len_bits <= bytes.len() * 8);
        BitReader { bytes, pos: 0, len: len_bits }
    }

    pub fn remaining(&self) -> usize {
        self.len - self.pos
    }

    pub fn read(&mut self, nbits: usize) -> u64 {
        assert!(nbits <= self.remaining(), "read past end of bit string");
        let mut out = 0u64;
        let mut remaining = nbits;
        while remaining > 0 {
            let byte = self.bytes[self.pos / 8];
            let used = self.pos % 8;
            let room = 8 - used;
            let take = room.min(remaining);
            let chunk = (byte >> (room - take)) & ((1u16 << take) - 1) as u8;
            out = (out << take) | u64::from(chunk);
            self.pos += take;
            remaining -= take;
        }
        out
    }
}

fn validate(m: &Message) -> Result<(), ProtocolError> {
    if m.level > MAX_LEVEL {
        return Err(ProtocolError::LevelOverflow(m.level));
    }
    match (m.kind.is_long(), m.weight.is_some()) {
        (true, false) => Err(ProtocolError::MissingWeight(m.kind)),
        (false, true) => Err(ProtocolError::UnexpectedWeight(m.kind)),
        _ => Ok(()),
    }
}

/// Appends `m` to `w`. Fails on malformed messages or, in compressed mode, a
/// tie rank that does not fit 8 bits.
pub fn encode_into(w: &mut BitWriter, m: &Message, mode: WireMode) -> Result<(), ProtocolError> {
    validate(m)?;
    let tie = match (m.weight, mode) {
        (Some(k), WireMode::Compressed) if !k.is_infinite() && k.tie > 0xff => {
            return Err(ProtocolError::TieRankOverflow(k.tie))
        }
        (Some(k), _) => Some(k),
        (None, _) => None,
    };
    let header = (u64::from(m.kind.code()) << 13) | (u64::from(m.level) << 8) | (u64::from(m.state_flag) << 7);
    w.write(header, HEADER_BITS);
    w.write(u64::from(m.src), 32);
    w.write(u64::from(m.dst), 32);
    if let Some(k) = tie {
        w.write(k.w.to_bits(), 64);
        match mode {
            WireMode::Compressed => w.write(if k.is_infinite() { 0xff } else { k.tie }, 8),
            WireMode::Wide => w.write(k.tie, 64),
        }
    }
    Ok(())
}

pub fn encode(m: &Message, mode: WireMode) -> Result<BitString, ProtocolError> {
    let mut w = BitWriter::with_capacity_bytes(26);
    encode_into(&mut w, m, mode)?;
    Ok(w.finish())
}

/// Reads one message. Padding bits in the header are ignored.
pub fn decode_from(r: &mut BitReader<'_>, mode: WireMode) -> Result<Message, ProtocolError> {
    if r.remaining() < HEADER_BITS {
        return Err(ProtocolError::LengthMismatch { expected: SHORT_BITS, actual: r.remaining() });
    }
    let header = r.read(HEADER_BITS);
    let kind = MessageKind::from_code((header >> 13) as u8)?;
    let need = mode.encoded_bits(kind) - HEADER_BITS;
    if r.remaining() < need {
        return Err(ProtocolError::LengthMismatch {
            expected: mode.encoded_bits(kind),
            actual: r.remaining() + HEADER_BITS,
        });
    }
    let level = ((header >> 8) & 0x1f) as u8;
    let state_flag = (header >> 7) & 1 == 1;
    let src = r.read(32) as VertexId;
    let dst = r.read(32) as VertexId;
    let weight = kind.is_long().then(|| {
        let w = f64::from_bits(r.read(64));
        let tie = match mode {
            WireMode::Compressed => r.read(8),
            WireMode::Wide => r.read(64),
        };
        if w == f64::INFINITY {
            WeightKey::INFINITY
        } else {
            WeightKey { w, tie }
        }
    });
    Ok(Message { kind, src, dst, level, state_flag, weight })
}

/// Decodes a single message that must occupy the whole bit string.
pub fn decode(bits: &BitString, mode: WireMode) -> Result<Message, ProtocolError> {
    let mut r = BitReader::new(bits.as_bytes(), bits.len());
    let m = decode_from(&mut r, mode)?;
    if r.remaining() != 0 {
        return Err(ProtocolError::LengthMismatch { expected: mode.encoded_bits(m.kind), actual: bits.len() });
    }
    Ok(m)
}

/// Decodes every message of a flushed block, in order.
pub fn decode_block(bytes: &[u8], mode: WireMode) -> Result<Vec<Message>, ProtocolError> {
    let mut out = Vec::with_capacity(bytes.len() * 8 / SHORT_BITS);
    let mut r = BitReader::new(bytes, bytes.len() * 8);
    // Trailing padding is always shorter than a byte, hence than any message.
    while r.remaining() >= SHORT_BITS {
        out.push(decode_from(&mut r, mode)?);
    }
    Ok(out)
}

/// Staging area for messages bound to one destination worker.
#[derive(Clone, Debug)]
pub struct AggregationBuffer {
    dest_worker: usize,
    max_bytes: usize,
    mode: WireMode,
    writer: BitWriter,
    count: usize,
}

impl AggregationBuffer {
    /// `max_bytes` must hold at least one maximal message.
    pub fn new(dest_worker: usize, max_bytes: usize, mode: WireMode) -> Self {
        assert!(max_bytes * 8 >= mode.long_bits(), "buffer of {max_bytes} bytes cannot hold one message");
        AggregationBuffer { dest_worker, max_bytes, mode, writer: BitWriter::with_capacity_bytes(max_bytes), count: 0 }
    }

    pub fn dest_worker(&self) -> usize {
        self.dest_worker
    }

    pub fn len_bytes(&self) -> usize {
        self.writer.len_bytes()
    }

    pub fn len_messages(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Appends `m`; returns true when one more maximal message might not fit,
    /// i.e. the buffer should be flushed now.
    pub fn push(&mut self, m: &Message) -> Result<bool, ProtocolError> {
        encode_into(&mut self.writer, m, self.mode)?;
        self.count += 1;
        Ok(self.writer.len_bits() + self.mode.long_bits() > self.max_bytes * 8)
    }

    /// Byte-padded packed messages and their count; empties the buffer.
    pub fn flush(&mut self) -> (Vec<u8>, usize) {
        let bytes = self.writer.take_bytes();
        self.writer = BitWriter::with_capacity_bytes(self.max_bytes);
        (bytes, std::mem::take(&mut self.count))
    }
}
