//! Trace-level simulation of the defenses: pure functions from an
//! undefended trace to a defended one, with no runtime, clock or network
//! involved. Unlike the live machines, the simulators see the whole load up
//! front, so there is no soft start/stop; the defense is assumed active for
//! the entire trace.
//!
//! Dummy packets inserted by any simulator have size
//! [`crate::DUMMY_CELL_BYTES`].

mod front;
mod randomwt;
mod tamaraw;

pub use front::simulate_front;
pub use randomwt::{
    simulate_randomwt, simulate_randomwt_with, FakeRttModel, RttSpread, SimError,
};
pub use tamaraw::{simulate_tamaraw, SlotGrid};

/// How the Tamaraw simulator resolves packet dependencies it cannot know.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationStrategy {
    /// Packets are independent: each goes to the earliest free slot of its
    /// own direction at or after its original time. Cross-direction order
    /// may change.
    Optimistic,
    /// Every packet depends on all earlier packets of the other direction:
    /// its slot must also be no earlier than their assigned times, keeping
    /// the global order.
    Pessimistic,
}
