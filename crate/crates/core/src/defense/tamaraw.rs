//! Tamaraw: cells leave each side at a fixed per-direction rate, with
//! dummies filling empty slots, until the load ends and the per-side cell
//! count has been padded to a multiple of `L`.

use std::collections::VecDeque;

use crate::kernel::{
    DefenseMachine, DefenseState, Kernel, KernelAction, KernelConfig, KernelError, KernelEvent,
    Side, SignalKind, TickDecision, TimerId,
};
use crate::num::{scalar, Scalar};

/// The slot timer: fires at every sending slot while padding runs.
pub const SLOT_TIMER: TimerId = TimerId(0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamarawConfig<T> {
    /// Gap between cells sent by the client, in seconds.
    pub rho_out: T,
    /// Gap between cells sent by the bridge, in seconds.
    pub rho_in: T,
    /// Each side pads its per-episode cell count to a multiple of this.
    pub length_multiple: u32,
}

impl<T: Scalar> Default for TamarawConfig<T> {
    fn default() -> Self {
        TamarawConfig {
            rho_out: scalar(0.012),
            rho_in: scalar(0.004),
            length_multiple: 200,
        }
    }
}

impl<T: Scalar> TamarawConfig<T> {
    /// The sending gap for one side of the tunnel.
    pub fn rho(&self, side: Side) -> T {
        match side {
            Side::Client => self.rho_out,
            Side::Bridge => self.rho_in,
        }
    }
}

/// One Tamaraw endpoint.
///
/// The client walks Stop -> Ready -> Start -> Padding -> Stop; the bridge
/// only reacts to `StartPad`/`StopPad` signals, finishing its own mod-`L`
/// padding after a stop request.
#[derive(Debug, Clone)]
pub struct TamarawMachine<T> {
    kernel: Kernel<T>,
    config: TamarawConfig<T>,
    /// Cells sent this padding episode, dummy and real alike.
    n_total: u64,
    /// Sizes of queued real packets awaiting a slot, FIFO.
    queue: VecDeque<u32>,
}

impl<T: Scalar> TamarawMachine<T> {
    pub fn new(side: Side, config: TamarawConfig<T>, kernel_config: KernelConfig<T>) -> Self {
        debug_assert!(config.rho_out > T::zero() && config.rho_in > T::zero());
        debug_assert!(config.length_multiple >= 1);
        TamarawMachine {
            kernel: Kernel::new(side, kernel_config),
            config,
            n_total: 0,
            queue: VecDeque::new(),
        }
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    fn rho(&self) -> T {
        self.config.rho(self.kernel.side())
    }

    fn at_multiple(&self) -> bool {
        self.n_total.is_multiple_of(u64::from(self.config.length_multiple))
    }

    /// One sending slot in Start or Padding: release a queued real packet if
    /// any, otherwise a dummy; stop at a multiple of `L` once the queue has
    /// drained in Padding.
    fn slot(&mut self) -> Vec<KernelAction<T>> {
        let padding = self.kernel.state() == DefenseState::Padding;
        if padding && self.queue.is_empty() && self.at_multiple() {
            // Entered Padding already on a multiple: nothing left to send.
            return self.stop_actions(Vec::new());
        }
        let send = match self.queue.pop_front() {
            Some(bytes) => KernelAction::SendReal { bytes },
            None => KernelAction::SendDummy,
        };
        self.n_total += 1;
        if padding && self.queue.is_empty() && self.at_multiple() {
            return self.stop_actions(vec![send]);
        }
        vec![
            send,
            KernelAction::ArmTimer {
                timer: SLOT_TIMER,
                delay: self.rho(),
            },
        ]
    }

    fn stop_actions(&mut self, mut actions: Vec<KernelAction<T>>) -> Vec<KernelAction<T>> {
        self.kernel.set_state(DefenseState::Stop);
        actions.push(KernelAction::EnterState(DefenseState::Stop));
        if self.kernel.side() == Side::Client {
            actions.push(KernelAction::SendSignal(SignalKind::StopPad));
        }
        actions
    }
}

impl<T: Scalar> DefenseMachine<T> for TamarawMachine<T> {
    fn side(&self) -> Side {
        self.kernel.side()
    }

    fn state(&self) -> DefenseState {
        self.kernel.state()
    }

    fn on_event(&mut self, event: KernelEvent<T>) -> Result<Vec<KernelAction<T>>, KernelError> {
        match event {
            KernelEvent::RealPacketQueued { t, size, .. } => {
                self.kernel.note_real(t)?;
                let client = self.kernel.side() == Side::Client;
                Ok(match self.kernel.state() {
                    DefenseState::Stop if client => {
                        self.n_total = 0;
                        self.kernel.set_state(DefenseState::Ready);
                        vec![
                            KernelAction::SendReal { bytes: size },
                            KernelAction::EnterState(DefenseState::Ready),
                        ]
                    }
                    // The bridge never changes state on its own; it forwards
                    // immediately until signalled into Start.
                    DefenseState::Stop | DefenseState::Ready => {
                        vec![KernelAction::SendReal { bytes: size }]
                    }
                    DefenseState::Start => {
                        self.queue.push_back(size);
                        Vec::new()
                    }
                    DefenseState::Padding if client => {
                        self.queue.push_back(size);
                        self.kernel.set_state(DefenseState::Start);
                        vec![KernelAction::EnterState(DefenseState::Start)]
                    }
                    // A draining bridge keeps its slots; queued data rides
                    // them ahead of dummies.
                    DefenseState::Padding => {
                        self.queue.push_back(size);
                        Vec::new()
                    }
                })
            }
            KernelEvent::WindowTick { t } => Ok(match self.kernel.tick_decision(t)? {
                TickDecision::TriggerStart => {
                    self.kernel.set_state(DefenseState::Start);
                    vec![
                        KernelAction::SendSignal(SignalKind::StartPad),
                        KernelAction::EnterState(DefenseState::Start),
                        KernelAction::ArmTimer {
                            timer: SLOT_TIMER,
                            delay: T::zero(),
                        },
                    ]
                }
                TickDecision::ReturnToStop => {
                    self.kernel.set_state(DefenseState::Stop);
                    vec![KernelAction::EnterState(DefenseState::Stop)]
                }
                TickDecision::SoftStop => {
                    self.kernel.set_state(DefenseState::Padding);
                    vec![KernelAction::EnterState(DefenseState::Padding)]
                }
                TickDecision::Hold => Vec::new(),
            }),
            KernelEvent::TimerFired { timer, .. } => {
                if timer != SLOT_TIMER
                    || !matches!(
                        self.kernel.state(),
                        DefenseState::Start | DefenseState::Padding
                    )
                {
                    // Cancelled slots are never processed.
                    return Ok(Vec::new());
                }
                Ok(self.slot())
            }
            KernelEvent::PeerSignal { signal, .. } => {
                if self.kernel.side() == Side::Client {
                    return self.kernel.illegal("PeerSignal");
                }
                match signal {
                    SignalKind::StartPad => match self.kernel.state() {
                        DefenseState::Stop => {
                            self.n_total = 0;
                            self.kernel.set_state(DefenseState::Start);
                            Ok(vec![
                                KernelAction::EnterState(DefenseState::Start),
                                KernelAction::ArmTimer {
                                    timer: SLOT_TIMER,
                                    delay: T::zero(),
                                },
                            ])
                        }
                        // The client restarted before our drain finished; the
                        // slot timer is still live.
                        DefenseState::Padding => {
                            self.kernel.set_state(DefenseState::Start);
                            Ok(vec![KernelAction::EnterState(DefenseState::Start)])
                        }
                        _ => self.kernel.illegal("PeerSignal(StartPad)"),
                    },
                    SignalKind::StopPad => match self.kernel.state() {
                        DefenseState::Start => {
                            if self.queue.is_empty() && self.at_multiple() {
                                self.kernel.set_state(DefenseState::Stop);
                                Ok(vec![
                                    KernelAction::CancelTimer(SLOT_TIMER),
                                    KernelAction::EnterState(DefenseState::Stop),
                                ])
                            } else {
                                self.kernel.set_state(DefenseState::Padding);
                                Ok(vec![KernelAction::EnterState(DefenseState::Padding)])
                            }
                        }
                        // Duplicate stop requests are a no-op.
                        DefenseState::Stop | DefenseState::Padding => Ok(Vec::new()),
                        _ => self.kernel.illegal("PeerSignal(StopPad)"),
                    },
                    SignalKind::EndBurst => self.kernel.illegal("PeerSignal(EndBurst)"),
                }
            }
        }
    }

    fn pending_real(&self) -> usize {
        self.queue.len()
    }
}
