//! Transport runtime for the wfpad defenses: a client-side SOCKS5 proxy and
//! a bridge that exchange fixed-size sealed cells over one TCP connection
//! per session, with the defense state machine deciding when real, dummy and
//! signal cells leave each side.
//!
//! Every wire record in a session has the same length, so a byte-level
//! observer cannot tell real cells from cover traffic. Both endpoints can
//! log a [`capture::WireTrace`] of what they sent and received (kind taken
//! from their own knowledge, never parsed off the wire), which converts to a
//! `wfpad` trace for overhead measurement. The [`mod@replay`] module drives
//! a synthetic load through a loopback client/bridge pair for exactly that
//! purpose.

pub mod bridge;
pub mod capture;
pub mod cell;
pub mod client;
pub mod config;
pub mod handshake;
pub mod replay;
pub mod seal;
pub mod session;
pub mod socks;
pub mod stream;

pub use bridge::BridgeProxy;
pub use capture::{CaptureLog, RevealedKind, WireTrace};
pub use cell::{Cell, CellError, CellType, CELL_BODY_LEN, CELL_LEN};
pub use client::ClientProxy;
pub use config::{DefenseId, DefenseSettings, ProxyConfig};
pub use replay::{replay, ReplayOptions, ReplayOutcome};
pub use seal::{ChaChaSealer, NullSealer, SealError, Sealer};
