//! The padding defenses, each as a [`crate::kernel::DefenseMachine`]
//! layered on the shared kernel:
//!
//! - [`tamaraw`]: constant-rate cell emission with dummy fill and
//!   end-of-load padding to a multiple of `L`.
//! - [`front`]: a per-side random dummy schedule drawn from a Rayleigh
//!   distribution; real packets are never delayed.
//! - [`randomwt`]: half-duplex turn taking with real-burst tail padding and
//!   probabilistic fake bursts.

pub mod front;
pub mod randomwt;
pub mod tamaraw;

pub use front::{FrontConfig, FrontMachine, FrontSchedule};
pub use randomwt::{Burst, BurstKind, DuplexRole, RandomWtConfig, RandomWtMachine};
pub use tamaraw::{TamarawConfig, TamarawMachine};
