//! Padding defenses against website fingerprinting, plus the tooling needed
//! to study them: a trace data model with overhead metrics, the soft
//! start/stop state-machine kernel shared by every defense, three concrete
//! defenses (Tamaraw, FRONT and Random-WT), and deterministic trace-level
//! simulators for all three.
//!
//! The crate is organized bottom-up:
//!
//! - [`trace`]: timestamped, directed, sized packet events and their text
//!   file format.
//! - [`metrics`]: data/time overhead of a defended trace relative to its
//!   undefended baseline.
//! - [`kernel`]: the sliding-window counter and the Stop/Ready/Start(/Padding)
//!   engine that decides when padding runs.
//! - [`defense`]: the per-defense machines built on the kernel. These emit
//!   [`kernel::KernelAction`]s; a transport runtime (or a test fixture) turns
//!   the actions into wire records and timers.
//! - [`sim`]: pure functions that apply each defense to a recorded trace,
//!   without any runtime, clock or network.
//!
//! All time-valued math is generic over the scalar type through [`Scalar`],
//! so the same code runs in `f32` or `f64`. The aliases at the crate root
//! fix the common double-precision instantiation.

pub mod defense;
pub mod kernel;
pub mod metrics;
pub mod num;
pub mod sim;
pub mod trace;

pub use crate::num::Scalar;
pub use crate::trace::{Direction, Packet, PacketKind, Trace};

/// Packet size, in bytes, used for dummy packets inserted by the simulators.
/// Matches the payload unit of the tunnel's fixed-size cells.
pub const DUMMY_CELL_BYTES: u32 = 514;

/// Double-precision instantiations of the scalar-generic core types.
pub type Packet64 = trace::Packet<f64>;
pub type Trace64 = trace::Trace<f64>;
pub type OverheadReport64 = metrics::OverheadReport<f64>;
