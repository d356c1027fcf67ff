//! FRONT: each side independently schedules a random number of dummy cells
//! at Rayleigh-distributed offsets, front-loading the cover traffic. Real
//! packets are never delayed, and unsent dummies are dropped when the load
//! ends.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::kernel::{
    DefenseMachine, DefenseState, Kernel, KernelAction, KernelConfig, KernelError, KernelEvent,
    Side, SignalKind, TickDecision, TimerId,
};
use crate::num::{scalar, Scalar};
use crate::trace::Direction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontConfig<T> {
    /// Max dummy count scheduled by the client per episode.
    pub n_out: u32,
    /// Max dummy count scheduled by the bridge per episode.
    pub n_in: u32,
    /// Lower bound of the Rayleigh scale draw, in seconds.
    pub w_min: T,
    /// Upper bound of the Rayleigh scale draw, in seconds.
    pub w_max: T,
}

impl<T: Scalar> Default for FrontConfig<T> {
    fn default() -> Self {
        FrontConfig {
            n_out: 3000,
            n_in: 3000,
            w_min: T::one(),
            w_max: scalar(13.0),
        }
    }
}

impl<T: Scalar> FrontConfig<T> {
    pub fn padding_budget(&self, side: Direction) -> u32 {
        match side {
            Direction::Outgoing => self.n_out,
            Direction::Incoming => self.n_in,
        }
    }
}

/// Argument outside the sampler's domain.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("argument outside the sampler's domain")]
pub struct DomainError;

/// Inverse-CDF sample of the Rayleigh distribution with scale `w`:
/// `w * sqrt(-2 ln(1 - u))` for `u` in (0, 1).
pub fn rayleigh_sample<T: Scalar>(scale: T, u: T) -> Result<T, DomainError> {
    if !(scale > T::zero()) || !(u > T::zero()) || !(u < T::one()) {
        return Err(DomainError);
    }
    let two = scalar::<T>(2.0);
    Ok(scale * (-two * (T::one() - u).ln()).sqrt())
}

/// Rayleigh CDF at `t` for scale `w`. Used by distribution checks.
pub fn rayleigh_cdf<T: Scalar>(t: T, scale: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let two = scalar::<T>(2.0);
    T::one() - (-(t * t) / (two * scale * scale)).exp()
}

/// One episode's dummy schedule: the drawn scale and the sorted send
/// offsets, in seconds from the episode start.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSchedule<T> {
    pub scale: T,
    pub times: Vec<T>,
}

fn open01<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return scalar(u);
        }
    }
}

/// Draws a fresh schedule: `n ~ U{1..N_side}` dummy offsets sampled from a
/// Rayleigh distribution whose scale is itself drawn from
/// `U[w_min, w_max]`.
pub fn front_schedule<T: Scalar, R: Rng + ?Sized>(
    side: Direction,
    config: &FrontConfig<T>,
    rng: &mut R,
) -> FrontSchedule<T> {
    debug_assert!(config.w_min > T::zero() && config.w_min <= config.w_max);
    let budget = config.padding_budget(side).max(1);
    let n = rng.random_range(1..=budget);
    let span = config.w_max - config.w_min;
    let scale = config.w_min + span * scalar(rng.random::<f64>());
    let mut times: Vec<T> = (0..n)
        .map(|_| rayleigh_sample(scale, open01(rng)).expect("u in (0,1) and scale > 0"))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("samples are finite"));
    FrontSchedule { scale, times }
}

/// One FRONT endpoint. Dummy timer `i` of an episode is `TimerId(i)`.
#[derive(Debug)]
pub struct FrontMachine<T> {
    kernel: Kernel<T>,
    config: FrontConfig<T>,
    rng: StdRng,
    last_schedule: Option<FrontSchedule<T>>,
}

impl<T: Scalar> FrontMachine<T> {
    pub fn new(
        side: Side,
        config: FrontConfig<T>,
        kernel_config: KernelConfig<T>,
        seed: u64,
    ) -> Self {
        FrontMachine {
            kernel: Kernel::new(side, kernel_config),
            config,
            rng: StdRng::seed_from_u64(seed),
            last_schedule: None,
        }
    }

    /// The schedule drawn for the current (or most recent) episode.
    pub fn last_schedule(&self) -> Option<&FrontSchedule<T>> {
        self.last_schedule.as_ref()
    }

    fn start_actions(&mut self) -> Vec<KernelAction<T>> {
        let side = self.kernel.side().send_direction();
        let schedule = front_schedule(side, &self.config, &mut self.rng);
        let mut actions = Vec::with_capacity(schedule.times.len() + 2);
        if self.kernel.side() == Side::Client {
            actions.push(KernelAction::SendSignal(SignalKind::StartPad));
        }
        self.kernel.set_state(DefenseState::Start);
        actions.push(KernelAction::EnterState(DefenseState::Start));
        for (i, &delay) in schedule.times.iter().enumerate() {
            actions.push(KernelAction::ArmTimer {
                timer: TimerId(i as u32),
                delay,
            });
        }
        self.last_schedule = Some(schedule);
        actions
    }

    fn stop_actions(&mut self, signal: bool) -> Vec<KernelAction<T>> {
        self.kernel.set_state(DefenseState::Stop);
        let mut actions = vec![KernelAction::CancelAllTimers];
        if signal {
            actions.push(KernelAction::SendSignal(SignalKind::StopPad));
        }
        actions.push(KernelAction::EnterState(DefenseState::Stop));
        actions
    }
}

impl<T: Scalar> DefenseMachine<T> for FrontMachine<T> {
    fn side(&self) -> Side {
        self.kernel.side()
    }

    fn state(&self) -> DefenseState {
        self.kernel.state()
    }

    fn on_event(&mut self, event: KernelEvent<T>) -> Result<Vec<KernelAction<T>>, KernelError> {
        match event {
            // Real packets pass through untouched in every state.
            KernelEvent::RealPacketQueued { t, size, .. } => {
                self.kernel.note_real(t)?;
                Ok(match self.kernel.state() {
                    DefenseState::Stop if self.kernel.side() == Side::Client => {
                        self.kernel.set_state(DefenseState::Ready);
                        vec![
                            KernelAction::SendReal { bytes: size },
                            KernelAction::EnterState(DefenseState::Ready),
                        ]
                    }
                    _ => vec![KernelAction::SendReal { bytes: size }],
                })
            }
            KernelEvent::WindowTick { t } => Ok(match self.kernel.tick_decision(t)? {
                TickDecision::TriggerStart => self.start_actions(),
                TickDecision::ReturnToStop => {
                    self.kernel.set_state(DefenseState::Stop);
                    vec![KernelAction::EnterState(DefenseState::Stop)]
                }
                TickDecision::SoftStop => self.stop_actions(true),
                TickDecision::Hold => Vec::new(),
            }),
            KernelEvent::TimerFired { .. } => {
                if self.kernel.state() == DefenseState::Start {
                    Ok(vec![KernelAction::SendDummy])
                } else {
                    Ok(Vec::new())
                }
            }
            KernelEvent::PeerSignal { signal, .. } => {
                if self.kernel.side() == Side::Client {
                    return self.kernel.illegal("PeerSignal");
                }
                match signal {
                    SignalKind::StartPad => match self.kernel.state() {
                        DefenseState::Stop => Ok(self.start_actions()),
                        _ => self.kernel.illegal("PeerSignal(StartPad)"),
                    },
                    SignalKind::StopPad => match self.kernel.state() {
                        DefenseState::Start => Ok(self.stop_actions(false)),
                        DefenseState::Stop => Ok(Vec::new()),
                        _ => self.kernel.illegal("PeerSignal(StopPad)"),
                    },
                    SignalKind::EndBurst => self.kernel.illegal("PeerSignal(EndBurst)"),
                }
            }
        }
    }
}
