//! Packet traces: the common currency of the defenses, the simulators and
//! the metrics.
//!
//! A trace is an ordered sequence of timestamped, directed, sized packets,
//! each marked real or dummy. The text format is one packet per line,
//! `<timestamp>\t<signed-size>[\t<R|D>]`, where a positive size means an
//! outgoing packet (sent by the client side) and a negative size an incoming
//! one. The kind column defaults to `R`. Lines starting with `#` and blank
//! lines are ignored.

use std::fmt::Write as _;

use thiserror::Error;

use crate::num::Scalar;

/// Packet direction. `Outgoing` is the client-to-bridge direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Outgoing => Direction::Incoming,
            Direction::Incoming => Direction::Outgoing,
        }
    }
}

/// Whether a packet carries application data or cover traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Real,
    Dummy,
}

/// One packet event in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet<T> {
    /// Seconds since the start of the trace. Never negative.
    pub time: T,
    pub direction: Direction,
    /// Size in bytes. Always positive.
    pub size: u32,
    pub kind: PacketKind,
}

impl<T: Scalar> Packet<T> {
    pub fn real(time: T, direction: Direction, size: u32) -> Self {
        Packet {
            time,
            direction,
            size,
            kind: PacketKind::Real,
        }
    }

    pub fn dummy(time: T, direction: Direction, size: u32) -> Self {
        Packet {
            time,
            direction,
            size,
            kind: PacketKind::Dummy,
        }
    }
}

/// A packet sequence ordered by timestamp. Ties keep insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace<T> {
    packets: Vec<Packet<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn new() -> Self {
        Trace {
            packets: Vec::new(),
        }
    }

    /// Builds a trace from packets in any order. The sort is stable, so
    /// packets with equal timestamps keep their relative order.
    pub fn from_packets(mut packets: Vec<Packet<T>>) -> Self {
        packets.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("packet times are ordered"));
        Trace { packets }
    }

    /// Appends a packet, inserting it after any packet with the same or an
    /// earlier timestamp.
    pub fn push(&mut self, packet: Packet<T>) {
        let at = self
            .packets
            .partition_point(|p| p.time <= packet.time);
        if at == self.packets.len() {
            self.packets.push(packet);
        } else {
            self.packets.insert(at, packet);
        }
    }

    pub fn packets(&self) -> &[Packet<T>] {
        &self.packets
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Packet<T>> {
        self.packets.iter()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Total bytes over all packets, real and dummy alike.
    pub fn total_bytes(&self) -> u64 {
        self.packets.iter().map(|p| u64::from(p.size)).sum()
    }

    /// Total bytes over packets of one kind.
    pub fn bytes_of_kind(&self, kind: PacketKind) -> u64 {
        self.packets
            .iter()
            .filter(|p| p.kind == kind)
            .map(|p| u64::from(p.size))
            .sum()
    }

    /// Timestamp of the last real packet, if any. Dummy packets after the
    /// end of real traffic do not extend the load time.
    pub fn last_real_time(&self) -> Option<T> {
        self.packets
            .iter()
            .rev()
            .find(|p| p.kind == PacketKind::Real)
            .map(|p| p.time)
    }

    pub fn count_of_kind(&self, kind: PacketKind) -> usize {
        self.packets.iter().filter(|p| p.kind == kind).count()
    }
}

impl<'a, T> IntoIterator for &'a Trace<T> {
    type Item = &'a Packet<T>;
    type IntoIter = std::slice::Iter<'a, Packet<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.packets.iter()
    }
}

/// Error from [`parse_trace`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed trace line")]
    MalformedLine { line: usize },
    #[error("line {line}: negative timestamp")]
    NegativeTimestamp { line: usize },
}

/// Parses the text trace format. Returns packets sorted by timestamp.
pub fn parse_trace<T: Scalar>(text: &str) -> Result<Trace<T>, ParseError> {
    let mut packets = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut fields = content.split('\t');
        let ts_field = fields.next().ok_or(ParseError::MalformedLine { line })?;
        let size_field = fields.next().ok_or(ParseError::MalformedLine { line })?;
        let kind_field = fields.next();
        if fields.next().is_some() {
            return Err(ParseError::MalformedLine { line });
        }

        let ts: f64 = ts_field
            .parse()
            .map_err(|_| ParseError::MalformedLine { line })?;
        if !ts.is_finite() {
            return Err(ParseError::MalformedLine { line });
        }
        if ts < 0.0 {
            return Err(ParseError::NegativeTimestamp { line });
        }

        let signed: i64 = size_field
            .parse()
            .map_err(|_| ParseError::MalformedLine { line })?;
        if signed == 0 {
            return Err(ParseError::MalformedLine { line });
        }
        let direction = if signed > 0 {
            Direction::Outgoing
        } else {
            Direction::Incoming
        };
        let size = u32::try_from(signed.unsigned_abs())
            .map_err(|_| ParseError::MalformedLine { line })?;

        let kind = match kind_field {
            None | Some("R") => PacketKind::Real,
            Some("D") => PacketKind::Dummy,
            Some(_) => return Err(ParseError::MalformedLine { line }),
        };

        packets.push(Packet {
            time: T::from_f64_lossy(ts),
            direction,
            size,
            kind,
        });
    }
    Ok(Trace::from_packets(packets))
}

/// Writes a trace back to the text format, one packet per line with the
/// kind column always present. `parse_trace` of the output reproduces the
/// trace exactly.
pub fn serialize_trace<T: Scalar>(trace: &Trace<T>) -> String {
    let mut out = String::new();
    for p in trace.iter() {
        let sign = match p.direction {
            Direction::Outgoing => "",
            Direction::Incoming => "-",
        };
        let kind = match p.kind {
            PacketKind::Real => "R",
            PacketKind::Dummy => "D",
        };
        writeln!(out, "{}\t{}{}\t{}", p.time, sign, p.size, kind).expect("write to String");
    }
    out
}
