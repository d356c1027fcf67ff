//! Wire-trace capture: each endpoint records (time, direction, record
//! length, revealed kind) for every record it sends or receives. The kind
//! comes from the endpoint's own knowledge of the cell it sealed or opened,
//! never from inspecting wire bytes, which are uniform by construction.

use std::sync::{Arc, Mutex};

use wfpad::trace::{Direction, Packet, PacketKind, Trace};

/// What the logging endpoint knows about a record's content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevealedKind {
    Real,
    Dummy,
    Signal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireRecord {
    /// Seconds since the session epoch.
    pub t: f64,
    pub direction: Direction,
    /// Full wire record length in bytes.
    pub len: usize,
    pub kind: RevealedKind,
}

/// A session's record log, in capture order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WireTrace {
    records: Vec<WireRecord>,
}

impl WireTrace {
    pub fn new() -> Self {
        WireTrace::default()
    }

    pub fn push(&mut self, record: WireRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[WireRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Converts to a metrics trace. Payload records count as real packets;
    /// dummy and signal records are both cover traffic. With `rebase`, times
    /// shift so the first record sits at zero, matching the convention that
    /// a trace starts with its first packet.
    pub fn to_trace(&self, rebase: bool) -> Trace<f64> {
        let origin = if rebase {
            self.records.first().map(|r| r.t).unwrap_or(0.0)
        } else {
            0.0
        };
        Trace::from_packets(
            self.records
                .iter()
                .map(|r| Packet {
                    time: r.t - origin,
                    direction: r.direction,
                    size: r.len as u32,
                    kind: match r.kind {
                        RevealedKind::Real => PacketKind::Real,
                        RevealedKind::Dummy | RevealedKind::Signal => PacketKind::Dummy,
                    },
                })
                .collect(),
        )
    }
}

/// Shareable append-only handle to a [`WireTrace`].
#[derive(Debug, Clone, Default)]
pub struct CaptureLog {
    inner: Arc<Mutex<WireTrace>>,
}

impl CaptureLog {
    pub fn new() -> Self {
        CaptureLog::default()
    }

    pub fn push(&self, record: WireRecord) {
        self.inner.lock().expect("capture lock").push(record);
    }

    pub fn snapshot(&self) -> WireTrace {
        self.inner.lock().expect("capture lock").clone()
    }
}
