//! Random-WT: both endpoints talk in half-duplex turns. The side holding
//! the token (Talkie) sends one burst per turn, either its queued real data
//! padded with a random tail or, with probability `p_fake`, a burst of pure
//! dummies, then hands the token over with an `EndBurst` signal. A talkie
//! timer keeps the token moving when there is nothing to say.
//!
//! Turn taking runs in every state; dummy traffic (tail padding and fake
//! bursts) is emitted only in Start.

use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::kernel::{
    DefenseMachine, DefenseState, Kernel, KernelAction, KernelConfig, KernelError, KernelEvent,
    Side, SignalKind, TickDecision, TimerId,
};
use crate::num::{scalar, Scalar};
use crate::trace::Direction;

/// Fires when a Talkie endpoint has had nothing to say for `t_talkie`.
pub const TALKIE_TIMER: TimerId = TimerId(0);
/// Fires one scheduling quantum after the last real send; its expiry marks
/// the end of the current real burst.
pub const BURST_GAP_TIMER: TimerId = TimerId(1);

/// The burst boundary detector's scheduling quantum, in seconds.
pub const BURST_GAP_QUANTUM: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWtConfig<T> {
    /// Max tail padding on a client real burst.
    pub n_real_out: u32,
    /// Max tail padding on a bridge real burst.
    pub n_real_in: u32,
    /// Max size of a client fake burst.
    pub n_fake_out: u32,
    /// Max size of a bridge fake burst.
    pub n_fake_in: u32,
    /// Probability of sending a fake burst on an idle Talkie turn.
    pub p_fake: T,
    /// Idle time after which a Talkie endpoint passes the token, in seconds.
    pub t_talkie: T,
}

impl<T: Scalar> Default for RandomWtConfig<T> {
    fn default() -> Self {
        RandomWtConfig {
            n_real_out: 4,
            n_real_in: 45,
            n_fake_out: 8,
            n_fake_in: 90,
            p_fake: scalar(0.4),
            t_talkie: scalar(0.5),
        }
    }
}

impl<T: Scalar> RandomWtConfig<T> {
    pub fn real_budget(&self, side: Direction) -> u32 {
        match side {
            Direction::Outgoing => self.n_real_out,
            Direction::Incoming => self.n_real_in,
        }
    }

    pub fn fake_budget(&self, side: Direction) -> u32 {
        match side {
            Direction::Outgoing => self.n_fake_out,
            Direction::Incoming => self.n_fake_in,
        }
    }
}

/// Who may transmit right now. Exactly one endpoint is Talkie at any
/// instant (modulo a signal in flight); the token moves on `EndBurst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuplexRole {
    Talkie,
    Walkie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstKind {
    RealPadded,
    Fake,
}

/// One burst as shaped by the defense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Burst {
    pub direction: Direction,
    pub real_count: u32,
    pub dummy_count: u32,
    pub kind: BurstKind,
}

/// Tail-pads a finished real burst with `U{0..N_side_real}` dummies.
pub fn pad_real_burst<T: Scalar, R: Rng + ?Sized>(
    real_count: u32,
    side: Direction,
    config: &RandomWtConfig<T>,
    rng: &mut R,
) -> Burst {
    debug_assert!(real_count >= 1);
    Burst {
        direction: side,
        real_count,
        dummy_count: rng.random_range(0..=config.real_budget(side)),
        kind: BurstKind::RealPadded,
    }
}

/// With probability `p_fake`, a fake burst of `U{0..N_side_fake}` dummies.
pub fn maybe_fake_burst<T: Scalar, R: Rng + ?Sized>(
    side: Direction,
    config: &RandomWtConfig<T>,
    rng: &mut R,
) -> Option<Burst> {
    if rng.random::<f64>() >= config.p_fake.to_f64_lossy() {
        return None;
    }
    Some(Burst {
        direction: side,
        real_count: 0,
        dummy_count: rng.random_range(0..=config.fake_budget(side)),
        kind: BurstKind::Fake,
    })
}

/// One Random-WT endpoint. The client starts as Talkie.
#[derive(Debug)]
pub struct RandomWtMachine<T> {
    kernel: Kernel<T>,
    config: RandomWtConfig<T>,
    rng: StdRng,
    role: DuplexRole,
    /// Real packet sizes queued while Walkie, FIFO.
    queue: VecDeque<u32>,
    /// Real cells sent since this Talkie turn's burst began.
    burst_real: u32,
}

impl<T: Scalar> RandomWtMachine<T> {
    pub fn new(
        side: Side,
        config: RandomWtConfig<T>,
        kernel_config: KernelConfig<T>,
        seed: u64,
    ) -> Self {
        let role = match side {
            Side::Client => DuplexRole::Talkie,
            Side::Bridge => DuplexRole::Walkie,
        };
        RandomWtMachine {
            kernel: Kernel::new(side, kernel_config),
            config,
            rng: StdRng::seed_from_u64(seed),
            role,
            queue: VecDeque::new(),
            burst_real: 0,
        }
    }

    pub fn role(&self) -> DuplexRole {
        self.role
    }

    /// Runtime hook: direct transmission is only legal while Talkie.
    pub fn guard_send(&self) -> Result<(), KernelError> {
        match self.role {
            DuplexRole::Talkie => Ok(()),
            DuplexRole::Walkie => Err(KernelError::SendWhileWalkie),
        }
    }

    fn send_direction(&self) -> Direction {
        self.kernel.side().send_direction()
    }

    fn pass_token(&mut self, actions: &mut Vec<KernelAction<T>>) {
        actions.push(KernelAction::SendSignal(SignalKind::EndBurst));
        self.role = DuplexRole::Walkie;
        self.burst_real = 0;
    }

    fn arm_talkie(&self) -> KernelAction<T> {
        KernelAction::ArmTimer {
            timer: TALKIE_TIMER,
            delay: self.config.t_talkie,
        }
    }

    fn arm_burst_gap(&self) -> KernelAction<T> {
        KernelAction::ArmTimer {
            timer: BURST_GAP_TIMER,
            delay: scalar(BURST_GAP_QUANTUM),
        }
    }
}

impl<T: Scalar> DefenseMachine<T> for RandomWtMachine<T> {
    fn side(&self) -> Side {
        self.kernel.side()
    }

    fn state(&self) -> DefenseState {
        self.kernel.state()
    }

    fn initial_actions(&mut self) -> Vec<KernelAction<T>> {
        match self.role {
            DuplexRole::Talkie => vec![self.arm_talkie()],
            DuplexRole::Walkie => Vec::new(),
        }
    }

    fn on_event(&mut self, event: KernelEvent<T>) -> Result<Vec<KernelAction<T>>, KernelError> {
        match event {
            KernelEvent::RealPacketQueued { t, size, .. } => {
                self.kernel.note_real(t)?;
                let mut actions = Vec::new();
                let entered_ready = self.kernel.state() == DefenseState::Stop
                    && self.kernel.side() == Side::Client;
                if entered_ready {
                    self.kernel.set_state(DefenseState::Ready);
                }
                match self.role {
                    DuplexRole::Talkie => {
                        actions.push(KernelAction::SendReal { bytes: size });
                        self.burst_real += 1;
                        if entered_ready {
                            actions.push(KernelAction::EnterState(DefenseState::Ready));
                        }
                        actions.push(KernelAction::CancelTimer(TALKIE_TIMER));
                        actions.push(self.arm_burst_gap());
                    }
                    DuplexRole::Walkie => {
                        self.queue.push_back(size);
                        if entered_ready {
                            actions.push(KernelAction::EnterState(DefenseState::Ready));
                        }
                    }
                }
                Ok(actions)
            }
            KernelEvent::TimerFired { timer, .. } => match timer {
                BURST_GAP_TIMER if self.role == DuplexRole::Talkie => {
                    // The upstream stream went quiet for a quantum: the real
                    // burst is over. Pad it (in Start only) and yield.
                    let mut actions = Vec::new();
                    if self.kernel.state() == DefenseState::Start && self.burst_real >= 1 {
                        let burst = pad_real_burst(
                            self.burst_real,
                            self.send_direction(),
                            &self.config,
                            &mut self.rng,
                        );
                        for _ in 0..burst.dummy_count {
                            actions.push(KernelAction::SendDummy);
                        }
                    }
                    self.pass_token(&mut actions);
                    Ok(actions)
                }
                TALKIE_TIMER if self.role == DuplexRole::Talkie => {
                    let mut actions = Vec::new();
                    self.pass_token(&mut actions);
                    Ok(actions)
                }
                _ => Ok(Vec::new()),
            },
            KernelEvent::PeerSignal { signal, .. } => match signal {
                SignalKind::EndBurst => {
                    if self.role == DuplexRole::Talkie {
                        return self.kernel.illegal("PeerSignal(EndBurst)");
                    }
                    self.role = DuplexRole::Talkie;
                    self.burst_real = 0;
                    let mut actions = Vec::new();
                    if !self.queue.is_empty() {
                        while let Some(bytes) = self.queue.pop_front() {
                            actions.push(KernelAction::SendReal { bytes });
                            self.burst_real += 1;
                        }
                        actions.push(self.arm_burst_gap());
                    } else if self.kernel.state() == DefenseState::Start {
                        match maybe_fake_burst(self.send_direction(), &self.config, &mut self.rng)
                        {
                            Some(burst) => {
                                for _ in 0..burst.dummy_count {
                                    actions.push(KernelAction::SendDummy);
                                }
                                self.pass_token(&mut actions);
                            }
                            None => actions.push(self.arm_talkie()),
                        }
                    } else {
                        actions.push(self.arm_talkie());
                    }
                    Ok(actions)
                }
                SignalKind::StartPad => {
                    if self.kernel.side() == Side::Client {
                        return self.kernel.illegal("PeerSignal(StartPad)");
                    }
                    match self.kernel.state() {
                        DefenseState::Stop => {
                            self.kernel.set_state(DefenseState::Start);
                            Ok(vec![KernelAction::EnterState(DefenseState::Start)])
                        }
                        _ => self.kernel.illegal("PeerSignal(StartPad)"),
                    }
                }
                SignalKind::StopPad => {
                    if self.kernel.side() == Side::Client {
                        return self.kernel.illegal("PeerSignal(StopPad)");
                    }
                    match self.kernel.state() {
                        DefenseState::Start => {
                            self.kernel.set_state(DefenseState::Stop);
                            Ok(vec![KernelAction::EnterState(DefenseState::Stop)])
                        }
                        DefenseState::Stop => Ok(Vec::new()),
                        _ => self.kernel.illegal("PeerSignal(StopPad)"),
                    }
                }
            },
            KernelEvent::WindowTick { t } => Ok(match self.kernel.tick_decision(t)? {
                TickDecision::TriggerStart => {
                    self.kernel.set_state(DefenseState::Start);
                    vec![
                        KernelAction::SendSignal(SignalKind::StartPad),
                        KernelAction::EnterState(DefenseState::Start),
                    ]
                }
                TickDecision::ReturnToStop => {
                    self.kernel.set_state(DefenseState::Stop);
                    vec![KernelAction::EnterState(DefenseState::Stop)]
                }
                TickDecision::SoftStop => {
                    self.kernel.set_state(DefenseState::Stop);
                    vec![
                        KernelAction::SendSignal(SignalKind::StopPad),
                        KernelAction::EnterState(DefenseState::Stop),
                    ]
                }
                TickDecision::Hold => Vec::new(),
            }),
        }
    }

    fn pending_real(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelAction as A;

    fn client() -> RandomWtMachine<f64> {
        RandomWtMachine::new(
            Side::Client,
            RandomWtConfig::default(),
            KernelConfig::default(),
            5,
        )
    }

    fn real(t: f64, size: u32) -> KernelEvent<f64> {
        KernelEvent::RealPacketQueued {
            t,
            direction: Direction::Outgoing,
            size,
        }
    }

    fn fired(t: f64, timer: TimerId) -> KernelEvent<f64> {
        KernelEvent::TimerFired { t, timer }
    }

    fn end_burst(t: f64) -> KernelEvent<f64> {
        KernelEvent::PeerSignal {
            t,
            signal: SignalKind::EndBurst,
        }
    }

    #[test]
    fn degenerate_padding_budget() {
        let config: RandomWtConfig<f64> = RandomWtConfig {
            n_real_out: 0,
            ..RandomWtConfig::default()
        };
        let mut rng = StdRng::seed_from_u64(0);
        for _ in 0..100 {
            let b = pad_real_burst(3, Direction::Outgoing, &config, &mut rng);
            assert_eq!(b.dummy_count, 0);
            assert_eq!(b.kind, BurstKind::RealPadded);
        }
    }

    #[test]
    fn padded_burst_totals_stay_in_bounds() {
        let config: RandomWtConfig<f64> = RandomWtConfig::default();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let b = pad_real_burst(5, Direction::Outgoing, &config, &mut rng);
            let total = b.real_count + b.dummy_count;
            assert!((5..=9).contains(&total));
        }
    }

    #[test]
    fn padding_mean_matches_uniform_expectation() {
        // U{0..45} has mean 22.5; over 1e5 draws the sample mean lands
        // within 0.3 of it.
        let config: RandomWtConfig<f64> = RandomWtConfig::default();
        let mut rng = StdRng::seed_from_u64(6);
        let n = 100_000;
        let sum: u64 = (0..n)
            .map(|_| u64::from(pad_real_burst(1, Direction::Incoming, &config, &mut rng).dummy_count))
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 22.5).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn fake_burst_frequency_matches_p_fake() {
        let config: RandomWtConfig<f64> = RandomWtConfig::default();
        let mut rng = StdRng::seed_from_u64(7);
        let n = 100_000;
        let fakes = (0..n)
            .filter(|_| maybe_fake_burst(Direction::Outgoing, &config, &mut rng).is_some())
            .count();
        let freq = fakes as f64 / n as f64;
        assert!((freq - 0.4).abs() < 0.005, "frequency {freq}");
    }

    #[test]
    fn identical_seed_and_events_give_identical_actions() {
        let run = || {
            let mut m: RandomWtMachine<f64> = RandomWtMachine::new(
                Side::Client,
                RandomWtConfig::default(),
                KernelConfig::default(),
                99,
            );
            let mut log = vec![format!("{:?}", m.initial_actions())];
            let mut t = 0.0;
            for i in 0..300 {
                t += 0.05;
                let ev = match i % 5 {
                    0 => real(t, 514),
                    1 => fired(t, BURST_GAP_TIMER),
                    2 => KernelEvent::WindowTick { t },
                    3 => fired(t, TALKIE_TIMER),
                    _ => {
                        if m.role() == DuplexRole::Walkie {
                            end_burst(t)
                        } else {
                            KernelEvent::WindowTick { t }
                        }
                    }
                };
                log.push(format!("{:?}", m.on_event(ev)));
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fake_burst_probability_extremes() {
        let mut rng = StdRng::seed_from_u64(2);
        let never = RandomWtConfig {
            p_fake: 0.0,
            ..RandomWtConfig::default()
        };
        let always = RandomWtConfig {
            p_fake: 1.0,
            ..RandomWtConfig::default()
        };
        for _ in 0..200 {
            assert!(maybe_fake_burst(Direction::Incoming, &never, &mut rng).is_none());
            let b = maybe_fake_burst(Direction::Incoming, &always, &mut rng).unwrap();
            assert_eq!(b.real_count, 0);
            assert!(b.dummy_count <= 90);
            assert_eq!(b.kind, BurstKind::Fake);
        }
    }

    #[test]
    fn talkie_starts_with_token_timer() {
        let mut m = client();
        assert_eq!(m.role(), DuplexRole::Talkie);
        assert_eq!(
            m.initial_actions(),
            vec![A::ArmTimer {
                timer: TALKIE_TIMER,
                delay: 0.5
            }]
        );
        let mut b: RandomWtMachine<f64> = RandomWtMachine::new(
            Side::Bridge,
            RandomWtConfig::default(),
            KernelConfig::default(),
            5,
        );
        assert_eq!(b.role(), DuplexRole::Walkie);
        assert_eq!(b.initial_actions(), vec![]);
    }

    #[test]
    fn idle_talkie_times_out_and_yields() {
        let mut m = client();
        m.initial_actions();
        let a = m.on_event(fired(0.5, TALKIE_TIMER)).unwrap();
        assert_eq!(a, vec![A::SendSignal(SignalKind::EndBurst)]);
        assert_eq!(m.role(), DuplexRole::Walkie);
        // A stale talkie expiry while Walkie is ignored.
        let a = m.on_event(fired(1.0, TALKIE_TIMER)).unwrap();
        assert_eq!(a, vec![]);
    }

    #[test]
    fn unpadded_burst_outside_start() {
        let mut m = client();
        m.initial_actions();
        let a = m.on_event(real(0.1, 514)).unwrap();
        assert_eq!(
            a,
            vec![
                A::SendReal { bytes: 514 },
                A::EnterState(DefenseState::Ready),
                A::CancelTimer(TALKIE_TIMER),
                A::ArmTimer {
                    timer: BURST_GAP_TIMER,
                    delay: BURST_GAP_QUANTUM
                },
            ]
        );
        // Burst boundary in Ready: no dummies ever, just the token transfer.
        let a = m.on_event(fired(0.11, BURST_GAP_TIMER)).unwrap();
        assert_eq!(a, vec![A::SendSignal(SignalKind::EndBurst)]);
        assert_eq!(m.role(), DuplexRole::Walkie);
    }

    #[test]
    fn start_pads_finished_bursts() {
        let mut m = client();
        m.initial_actions();
        m.on_event(real(0.0, 514)).unwrap();
        m.on_event(real(0.05, 514)).unwrap();
        let a = m.on_event(KernelEvent::WindowTick { t: 0.1 }).unwrap();
        assert_eq!(
            a,
            vec![
                A::SendSignal(SignalKind::StartPad),
                A::EnterState(DefenseState::Start),
            ]
        );
        // End of the running burst inside Start: tail dummies then EndBurst.
        let a = m.on_event(fired(0.15, BURST_GAP_TIMER)).unwrap();
        let dummies = a.iter().filter(|x| **x == A::SendDummy).count();
        assert!(dummies <= 4);
        assert_eq!(*a.last().unwrap(), A::SendSignal(SignalKind::EndBurst));
        assert_eq!(m.role(), DuplexRole::Walkie);
    }

    #[test]
    fn queued_data_flushes_on_token() {
        let mut m = client();
        m.initial_actions();
        m.on_event(fired(0.5, TALKIE_TIMER)).unwrap(); // go Walkie
        assert_eq!(m.on_event(real(0.6, 100)).unwrap(), vec![
            A::EnterState(DefenseState::Ready)
        ]);
        assert_eq!(m.on_event(real(0.7, 200)).unwrap(), vec![]);
        assert_eq!(m.pending_real(), 2);
        let a = m.on_event(end_burst(0.8)).unwrap();
        assert_eq!(
            a,
            vec![
                A::SendReal { bytes: 100 },
                A::SendReal { bytes: 200 },
                A::ArmTimer {
                    timer: BURST_GAP_TIMER,
                    delay: BURST_GAP_QUANTUM
                },
            ]
        );
        assert_eq!(m.role(), DuplexRole::Talkie);
        assert_eq!(m.pending_real(), 0);
    }

    #[test]
    fn idle_token_in_start_flips_fake_coin() {
        let always = RandomWtConfig {
            p_fake: 1.0,
            ..RandomWtConfig::default()
        };
        let mut m: RandomWtMachine<f64> =
            RandomWtMachine::new(Side::Client, always, KernelConfig::default(), 5);
        m.initial_actions();
        m.on_event(real(0.0, 514)).unwrap();
        m.on_event(real(0.05, 514)).unwrap();
        m.on_event(KernelEvent::WindowTick { t: 0.1 }).unwrap();
        m.on_event(fired(0.15, BURST_GAP_TIMER)).unwrap(); // yield token
        let a = m.on_event(end_burst(0.3)).unwrap();
        // Fake burst cells then EndBurst; role flips back to Walkie.
        assert_eq!(*a.last().unwrap(), A::SendSignal(SignalKind::EndBurst));
        assert!(a[..a.len() - 1].iter().all(|x| *x == A::SendDummy));
        assert_eq!(m.role(), DuplexRole::Walkie);

        let never = RandomWtConfig {
            p_fake: 0.0,
            ..RandomWtConfig::default()
        };
        let mut m: RandomWtMachine<f64> =
            RandomWtMachine::new(Side::Client, never, KernelConfig::default(), 5);
        m.initial_actions();
        m.on_event(real(0.0, 514)).unwrap();
        m.on_event(real(0.05, 514)).unwrap();
        m.on_event(KernelEvent::WindowTick { t: 0.1 }).unwrap();
        m.on_event(fired(0.15, BURST_GAP_TIMER)).unwrap();
        let a = m.on_event(end_burst(0.3)).unwrap();
        // Tails: wait for real data up to t_talkie.
        assert_eq!(
            a,
            vec![A::ArmTimer {
                timer: TALKIE_TIMER,
                delay: 0.5
            }]
        );
        assert_eq!(m.role(), DuplexRole::Talkie);
    }

    #[test]
    fn end_burst_while_talkie_is_illegal() {
        let mut m = client();
        m.initial_actions();
        let err = m.on_event(end_burst(0.1)).unwrap_err();
        assert!(matches!(err, KernelError::IllegalEvent { .. }));
    }

    #[test]
    fn guard_send_reflects_role() {
        let mut m = client();
        assert_eq!(m.guard_send(), Ok(()));
        m.initial_actions();
        m.on_event(fired(0.5, TALKIE_TIMER)).unwrap();
        assert_eq!(m.guard_send(), Err(KernelError::SendWhileWalkie));
    }

    #[test]
    fn no_dummies_in_stop_or_ready() {
        // Sweep a client through idle turn taking without ever hitting the
        // start threshold: no dummy may appear, and state changes only walk
        // the three-state graph.
        let legal = [
            (DefenseState::Stop, DefenseState::Ready),
            (DefenseState::Ready, DefenseState::Stop),
            (DefenseState::Ready, DefenseState::Start),
            (DefenseState::Start, DefenseState::Stop),
        ];
        let mut m = client();
        m.initial_actions();
        let mut t = 0.0;
        for i in 0..300 {
            t += 0.3;
            let before = m.state();
            let a = match i % 4 {
                0 => m.on_event(real(t, 514)).unwrap(),
                1 => m.on_event(fired(t, BURST_GAP_TIMER)).unwrap(),
                2 => {
                    if m.role() == DuplexRole::Walkie {
                        m.on_event(end_burst(t)).unwrap()
                    } else {
                        m.on_event(fired(t, TALKIE_TIMER)).unwrap()
                    }
                }
                _ => m.on_event(KernelEvent::WindowTick { t }).unwrap(),
            };
            assert!(
                !a.contains(&A::SendDummy),
                "dummy emitted in state {:?}",
                m.state()
            );
            if m.state() != before {
                assert!(legal.contains(&(before, m.state())));
            }
        }
    }
}
