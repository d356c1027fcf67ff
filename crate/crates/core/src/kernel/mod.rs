//! Machinery shared by all defenses: the real-packet window counter, the
//! Stop/Ready/Start(/Padding) engine, and the timer/event/action contract
//! between a defense machine and the runtime that hosts it.
//!
//! A defense machine consumes [`KernelEvent`]s one at a time, in
//! non-decreasing event time, and returns a sequence of [`KernelAction`]s.
//! The surrounding runtime (the tunnel, a simulator harness, or a test
//! fixture) is responsible for executing the actions: writing cells, arming
//! and cancelling timers, and delivering future events. Given the same
//! event sequence, configuration and RNG seed, a machine produces the same
//! action sequence.
//!
//! Timer semantics: arming a timer id that is already armed replaces the
//! earlier deadline. Timers fired after being cancelled must not be
//! delivered; a machine treats a stale [`KernelEvent::TimerFired`] as a
//! no-op rather than an error, since cancellation and expiry race in a real
//! runtime.

mod window;

pub use window::WindowCounter;

use thiserror::Error;

use crate::num::{scalar, Scalar};
use crate::trace::Direction;

/// Which endpoint of the tunnel a machine runs on.
///
/// The client drives the soft start/stop transitions; the bridge never
/// changes state on its own and instead mirrors the client's signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Client,
    Bridge,
}

impl Side {
    /// The direction of packets this side emits.
    pub fn send_direction(self) -> Direction {
        match self {
            Side::Client => Direction::Outgoing,
            Side::Bridge => Direction::Incoming,
        }
    }
}

/// Defense machine state. Dummy traffic may be emitted only in `Start` and
/// `Padding`; `Padding` is used by Tamaraw alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseState {
    Stop,
    Ready,
    Start,
    Padding,
}

/// In-band control carried by signal cells. On the wire a signal cell is
/// indistinguishable from any other cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    StartPad,
    StopPad,
    EndBurst,
}

/// Identifies one timer owned by a machine. Each defense defines its own id
/// space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimerId(pub u32);

/// An input delivered to a defense machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelEvent<T> {
    /// A real packet of `size` bytes was queued for sending on this side.
    RealPacketQueued {
        t: T,
        direction: Direction,
        size: u32,
    },
    /// Periodic prompt to evaluate the sliding-window predicate. Also
    /// delivered right after each real packet arrival.
    WindowTick { t: T },
    /// A previously armed timer expired.
    TimerFired { t: T, timer: TimerId },
    /// A signal cell arrived from the peer.
    PeerSignal { t: T, signal: SignalKind },
}

impl<T: Scalar> KernelEvent<T> {
    pub fn time(&self) -> T {
        match *self {
            KernelEvent::RealPacketQueued { t, .. }
            | KernelEvent::WindowTick { t }
            | KernelEvent::TimerFired { t, .. }
            | KernelEvent::PeerSignal { t, .. } => t,
        }
    }
}

/// An output requested by a defense machine, executed by the runtime in
/// order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelAction<T> {
    /// Send the oldest queued real packet; `bytes` is its size.
    SendReal { bytes: u32 },
    /// Send one dummy cell.
    SendDummy,
    /// Send a signal cell to the peer.
    SendSignal(SignalKind),
    /// Arm (or re-arm) a timer to fire `delay` seconds from the event time.
    ArmTimer { timer: TimerId, delay: T },
    CancelTimer(TimerId),
    CancelAllTimers,
    /// The machine changed state; informational for the runtime and fixtures.
    EnterState(DefenseState),
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("event time went backwards: {last} then {got}")]
    TimeRegression { last: f64, got: f64 },
    #[error("illegal event {event} in state {state:?}")]
    IllegalEvent {
        state: DefenseState,
        event: &'static str,
    },
    #[error("attempt to emit cells while in Walkie role")]
    SendWhileWalkie,
}

/// Thresholds for the soft start/stop condition, shared by all defenses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<T> {
    /// Width of the trailing window over real packets, in seconds.
    pub window: T,
    /// Enter Start from Ready once the window holds at least this many
    /// real packets.
    pub start_threshold: u32,
    /// Leave Ready/Start once the window holds at most this many real
    /// packets.
    pub stop_threshold: u32,
    /// Cadence at which the runtime should deliver `WindowTick`s.
    pub tick_interval: T,
}

impl<T: Scalar> Default for KernelConfig<T> {
    fn default() -> Self {
        KernelConfig {
            window: T::one(),
            start_threshold: 2,
            stop_threshold: 1,
            tick_interval: scalar(0.1),
        }
    }
}

/// What the shared window predicate decided on a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickDecision {
    /// Ready with enough real traffic: begin padding.
    TriggerStart,
    /// Ready but the traffic died down: go back to Stop without padding.
    ReturnToStop,
    /// Padding is running and the load appears finished.
    SoftStop,
    /// No transition.
    Hold,
}

/// Shared state for one machine instance: current defense state plus the
/// window counter. Defense modules embed this and layer their own behavior
/// on top.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    pub config: KernelConfig<T>,
    side: Side,
    state: DefenseState,
    window: WindowCounter<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(side: Side, config: KernelConfig<T>) -> Self {
        let window = WindowCounter::new(config.window);
        Kernel {
            config,
            side,
            state: DefenseState::Stop,
            window,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn state(&self) -> DefenseState {
        self.state
    }

    pub fn set_state(&mut self, state: DefenseState) {
        self.state = state;
    }

    /// Records a queued real packet into the window.
    pub fn note_real(&mut self, t: T) -> Result<(), KernelError> {
        self.window.record(t)
    }

    /// Current window count at time `t`.
    pub fn window_count(&mut self, t: T) -> Result<u32, KernelError> {
        self.window.query(t)
    }

    /// Evaluates the shared start/stop predicate for a `WindowTick` at `t`.
    ///
    /// Only the client side transitions autonomously; on the bridge this
    /// always holds.
    pub fn tick_decision(&mut self, t: T) -> Result<TickDecision, KernelError> {
        let n = self.window.query(t)?;
        if self.side == Side::Bridge {
            return Ok(TickDecision::Hold);
        }
        Ok(match self.state {
            DefenseState::Ready if n >= self.config.start_threshold => TickDecision::TriggerStart,
            DefenseState::Ready if n <= self.config.stop_threshold => TickDecision::ReturnToStop,
            DefenseState::Start if n <= self.config.stop_threshold => TickDecision::SoftStop,
            _ => TickDecision::Hold,
        })
    }

    pub fn illegal<A>(&self, event: &'static str) -> Result<A, KernelError> {
        Err(KernelError::IllegalEvent {
            state: self.state,
            event,
        })
    }
}

/// One padding defense bound to a side of the tunnel.
///
/// An instance is single-threaded: the runtime delivers one event at a time
/// in non-decreasing event time. Instances own their RNG, so identical
/// (events, seed, config) produce identical actions.
pub trait DefenseMachine<T: Scalar>: Send {
    fn side(&self) -> Side;

    fn state(&self) -> DefenseState;

    /// Actions to perform when the session starts, before any event.
    fn initial_actions(&mut self) -> Vec<KernelAction<T>> {
        Vec::new()
    }

    fn on_event(&mut self, event: KernelEvent<T>) -> Result<Vec<KernelAction<T>>, KernelError>;

    /// Number of real packets queued inside the machine, not yet released.
    fn pending_real(&self) -> usize {
        0
    }
}
