//! Deterministic co-simulation of a client and a bridge machine over a
//! virtual clock: timers fire exactly when armed, signal cells arrive after
//! a fixed latency, and scripted application data is injected at given
//! times. No wall clock, so cross-endpoint protocol properties can be
//! checked exactly.

use std::collections::HashMap;

use wfpad::defense::front::FrontMachine;
use wfpad::defense::randomwt::{RandomWtConfig, RandomWtMachine};
use wfpad::defense::tamaraw::{TamarawConfig, TamarawMachine};
use wfpad::kernel::{
    DefenseMachine, KernelAction, KernelConfig, KernelEvent, Side, SignalKind,
    TimerId,
};
use wfpad::trace::Direction;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Emission {
    Real(u32),
    Dummy,
    Signal(SignalKind),
}

struct Endpoint {
    machine: Box<dyn DefenseMachine<f64>>,
    timers: HashMap<TimerId, f64>,
    log: Vec<(f64, Emission)>,
}

impl Endpoint {
    fn new(machine: Box<dyn DefenseMachine<f64>>) -> Self {
        Endpoint {
            machine,
            timers: HashMap::new(),
            log: Vec::new(),
        }
    }

    fn next_deadline(&self) -> Option<(f64, TimerId)> {
        self.timers
            .iter()
            .map(|(&id, &t)| (t, id))
            .min_by(|a, b| (a.0, a.1 .0).partial_cmp(&(b.0, b.1 .0)).expect("finite"))
    }
}

/// One scheduled wire arrival (only signals matter to the machines).
struct Flight {
    at: f64,
    to: usize,
    signal: SignalKind,
}

struct Net {
    endpoints: [Endpoint; 2],
    flights: Vec<Flight>,
    latency: f64,
    /// Scripted (time, endpoint, size) app-data injections, sorted.
    script: Vec<(f64, usize, u32)>,
    now: f64,
}

const CLIENT: usize = 0;
const BRIDGE: usize = 1;

impl Net {
    fn new(client: Box<dyn DefenseMachine<f64>>, bridge: Box<dyn DefenseMachine<f64>>, latency: f64) -> Self {
        let mut net = Net {
            endpoints: [Endpoint::new(client), Endpoint::new(bridge)],
            flights: Vec::new(),
            latency,
            script: Vec::new(),
            now: 0.0,
        };
        for side in [CLIENT, BRIDGE] {
            let actions = net.endpoints[side].machine.initial_actions();
            net.apply(side, 0.0, actions);
        }
        net
    }

    fn schedule(&mut self, script: Vec<(f64, usize, u32)>) {
        self.script = script;
        self.script
            .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        self.script.reverse(); // pop from the back
    }

    fn apply(&mut self, side: usize, t: f64, actions: Vec<KernelAction<f64>>) {
        for action in actions {
            match action {
                KernelAction::SendReal { bytes } => {
                    self.endpoints[side].log.push((t, Emission::Real(bytes)));
                }
                KernelAction::SendDummy => {
                    self.endpoints[side].log.push((t, Emission::Dummy));
                }
                KernelAction::SendSignal(kind) => {
                    self.endpoints[side].log.push((t, Emission::Signal(kind)));
                    self.flights.push(Flight {
                        at: t + self.latency,
                        to: 1 - side,
                        signal: kind,
                    });
                }
                KernelAction::ArmTimer { timer, delay } => {
                    self.endpoints[side].timers.insert(timer, t + delay);
                }
                KernelAction::CancelTimer(timer) => {
                    self.endpoints[side].timers.remove(&timer);
                }
                KernelAction::CancelAllTimers => self.endpoints[side].timers.clear(),
                KernelAction::EnterState(_) => {}
            }
        }
    }

    fn deliver(&mut self, side: usize, event: KernelEvent<f64>) {
        let actions = self.endpoints[side]
            .machine
            .on_event(event)
            .expect("legal event");
        self.apply(side, event.time(), actions);
    }

    /// Runs until `horizon`, interleaving timers, arrivals, scripted app
    /// data and 100 ms window ticks in virtual-time order.
    fn run_until(&mut self, horizon: f64) {
        let tick = 0.1;
        let mut next_tick = self.now - (self.now % tick) + tick;
        loop {
            let mut next: (f64, u8) = (horizon, 0); // (time, kind); kind 0 = stop
            if next_tick < next.0 {
                next = (next_tick, 1);
            }
            for side in [CLIENT, BRIDGE] {
                if let Some((t, _)) = self.endpoints[side].next_deadline() {
                    if t < next.0 {
                        next = (t, 2 + side as u8);
                    }
                }
            }
            if let Some(flight) = self
                .flights
                .iter()
                .min_by(|a, b| a.at.partial_cmp(&b.at).expect("finite"))
            {
                if flight.at < next.0 {
                    next = (flight.at, 4);
                }
            }
            if let Some(&(t, _, _)) = self.script.last() {
                if t < next.0 {
                    next = (t, 5);
                }
            }

            let (t, kind) = next;
            if t >= horizon && kind == 0 {
                self.now = horizon;
                return;
            }
            self.now = t;
            match kind {
                1 => {
                    for side in [CLIENT, BRIDGE] {
                        self.deliver(side, KernelEvent::WindowTick { t });
                    }
                    next_tick += tick;
                }
                2 | 3 => {
                    let side = (kind - 2) as usize;
                    let (_, timer) = self.endpoints[side].next_deadline().expect("deadline");
                    self.endpoints[side].timers.remove(&timer);
                    self.deliver(side, KernelEvent::TimerFired { t, timer });
                }
                4 => {
                    let idx = self
                        .flights
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.at.partial_cmp(&b.1.at).expect("finite"))
                        .map(|(i, _)| i)
                        .expect("flight");
                    let flight = self.flights.swap_remove(idx);
                    self.deliver(
                        flight.to,
                        KernelEvent::PeerSignal {
                            t,
                            signal: flight.signal,
                        },
                    );
                }
                5 => {
                    let (_, side, size) = self.script.pop().expect("script entry");
                    let direction = match side {
                        CLIENT => Direction::Outgoing,
                        _ => Direction::Incoming,
                    };
                    self.deliver(
                        side,
                        KernelEvent::RealPacketQueued { t, direction, size },
                    );
                    self.deliver(side, KernelEvent::WindowTick { t });
                }
                _ => unreachable!(),
            }
        }
    }

    /// Both endpoints' emissions merged in time order, tagged with the
    /// sender's wire direction.
    fn merged(&self) -> Vec<(f64, Direction, Emission)> {
        let mut all: Vec<(f64, Direction, Emission)> = Vec::new();
        for (side, direction) in [(CLIENT, Direction::Outgoing), (BRIDGE, Direction::Incoming)] {
            all.extend(
                self.endpoints[side]
                    .log
                    .iter()
                    .map(|&(t, e)| (t, direction, e)),
            );
        }
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        all
    }
}

fn kernel() -> KernelConfig<f64> {
    KernelConfig::default()
}

#[test]
fn randomwt_half_duplex_safety_and_liveness() {
    let config = RandomWtConfig::default();
    let client = RandomWtMachine::new(Side::Client, config, kernel(), 21);
    let bridge = RandomWtMachine::new(Side::Bridge, config, kernel(), 22);
    let mut net = Net::new(Box::new(client), Box::new(bridge), 0.002);

    // A chatty load on both sides, then a long idle tail.
    let mut script = Vec::new();
    let mut t = 0.0;
    while t < 4.0 {
        script.push((t, CLIENT, 300));
        script.push((t + 0.05, BRIDGE, 900));
        script.push((t + 0.06, BRIDGE, 900));
        t += 0.35;
    }
    net.schedule(script);
    net.run_until(12.0);

    // Half-duplex safety: between two consecutive EndBurst markers, cells
    // flow in exactly one direction.
    let merged = net.merged();
    let mut current: Option<Direction> = None;
    let mut violations = 0;
    for (_, direction, emission) in &merged {
        match emission {
            Emission::Signal(SignalKind::EndBurst) => current = None,
            Emission::Signal(_) => {}
            _ => {
                if let Some(active) = current {
                    if active != *direction {
                        violations += 1;
                    }
                }
                current = Some(*direction);
            }
        }
    }
    assert_eq!(violations, 0, "mixed-direction burst: {merged:?}");

    // Liveness: while idle, consecutive EndBursts (the circulating token)
    // are never more than t_talkie plus one one-way latency apart.
    let ends: Vec<f64> = merged
        .iter()
        .filter(|(_, _, e)| *e == Emission::Signal(SignalKind::EndBurst))
        .map(|&(t, _, _)| t)
        .collect();
    assert!(ends.len() > 10);
    let idle_ends: Vec<f64> = ends.iter().copied().filter(|&t| t > 5.0).collect();
    assert!(idle_ends.len() >= 2, "token stopped circulating");
    for pair in idle_ends.windows(2) {
        assert!(
            pair[1] - pair[0] <= 0.5 + 0.002 + 1e-9,
            "token stalled for {}",
            pair[1] - pair[0]
        );
    }

    // No dummies outside Start on either side: once stopped (idle tail),
    // only signals flow.
    for &(t, _, e) in &merged {
        if t > 6.0 {
            assert!(matches!(e, Emission::Signal(_)), "late cover traffic at {t}");
        }
    }
}

#[test]
fn tamaraw_client_and_bridge_mirror_episodes() {
    let config = TamarawConfig {
        rho_out: 0.012,
        rho_in: 0.004,
        length_multiple: 50,
    };
    let client = TamarawMachine::new(Side::Client, config, kernel());
    let bridge = TamarawMachine::new(Side::Bridge, config, kernel());
    let mut net = Net::new(Box::new(client), Box::new(bridge), 0.003);

    let mut script = Vec::new();
    let mut t = 0.0;
    while t < 2.0 {
        script.push((t, CLIENT, 300));
        script.push((t + 0.02, BRIDGE, 900));
        t += 0.08;
    }
    net.schedule(script);
    net.run_until(10.0);

    let client_log = &net.endpoints[CLIENT].log;
    let start = client_log
        .iter()
        .position(|(_, e)| *e == Emission::Signal(SignalKind::StartPad))
        .expect("episode started");
    let stop = client_log
        .iter()
        .position(|(_, e)| *e == Emission::Signal(SignalKind::StopPad))
        .expect("episode stopped");
    let episode: Vec<(f64, Emission)> = client_log[start + 1..stop]
        .iter()
        .filter(|(_, e)| !matches!(e, Emission::Signal(_)))
        .copied()
        .collect();
    assert_eq!(episode.len() % 50, 0, "client episode {}", episode.len());
    // In virtual time the slots are rho apart to float precision.
    for pair in episode.windows(2) {
        assert!((pair[1].0 - pair[0].0 - 0.012).abs() < 1e-9);
    }

    // The bridge starts after StartPad arrives, paces at rho_in, and drains
    // to its own multiple of L after StopPad.
    let bridge_cells: Vec<f64> = net.endpoints[BRIDGE]
        .log
        .iter()
        .filter(|(_, e)| !matches!(e, Emission::Signal(_)))
        .map(|&(t, _)| t)
        .collect();
    let start_at = client_log[start].0 + 0.003;
    let paced: Vec<f64> = bridge_cells
        .iter()
        .copied()
        .filter(|&t| t >= start_at)
        .collect();
    assert_eq!(paced.len() % 50, 0, "bridge episode {}", paced.len());
    for pair in paced.windows(2) {
        assert!((pair[1] - pair[0] - 0.004).abs() < 1e-9);
    }
    // Forwarded immediately before the episode, not paced.
    assert!(bridge_cells.len() > paced.len());
}

#[test]
fn front_emits_the_whole_schedule_when_the_load_outlives_it() {
    let client = FrontMachine::new(Side::Client, Default::default(), kernel(), 41);
    let bridge = FrontMachine::new(Side::Bridge, Default::default(), kernel(), 42);
    let mut net = Net::new(Box::new(client), Box::new(bridge), 0.001);

    // Keep real traffic flowing far past any plausible schedule tail, so
    // no soft stop can cancel pending dummies. Virtual time is free.
    let script: Vec<(f64, usize, u32)> = (0..2000)
        .map(|i| (0.1 * i as f64, CLIENT, 300))
        .collect();
    net.schedule(script);
    net.run_until(210.0);

    let drawn = {
        let mut twin = FrontMachine::<f64>::new(Side::Client, Default::default(), kernel(), 41);
        twin.on_event(KernelEvent::RealPacketQueued {
            t: 0.0,
            direction: Direction::Outgoing,
            size: 300,
        })
        .unwrap();
        twin.on_event(KernelEvent::RealPacketQueued {
            t: 0.1,
            direction: Direction::Outgoing,
            size: 300,
        })
        .unwrap();
        twin.on_event(KernelEvent::WindowTick { t: 0.1 }).unwrap();
        let schedule = twin.last_schedule().unwrap();
        assert!(*schedule.times.last().unwrap() < 180.0);
        schedule.times.len()
    };
    let emitted = net.endpoints[CLIENT]
        .log
        .iter()
        .filter(|(_, e)| *e == Emission::Dummy)
        .count();
    assert_eq!(emitted, drawn, "every scheduled dummy must go out");
    // Equality held because the soft stop came only after the whole
    // schedule had fired.
    let stop_at = net.endpoints[CLIENT]
        .log
        .iter()
        .find(|(_, e)| *e == Emission::Signal(SignalKind::StopPad))
        .map(|&(t, _)| t)
        .expect("episode winds down after the load");
    assert!(stop_at > 180.0, "stopped at {stop_at}");
}

#[test]
fn front_emits_at_most_the_drawn_schedule() {
    let client = FrontMachine::new(Side::Client, Default::default(), kernel(), 33);
    let bridge = FrontMachine::new(Side::Bridge, Default::default(), kernel(), 34);
    let mut net = Net::new(Box::new(client), Box::new(bridge), 0.002);

    // Short load: the schedule reaches out to ~13 s of offsets, so the stop
    // after ~1.5 s must drop most of it.
    let script: Vec<(f64, usize, u32)> = (0..15)
        .map(|i| (0.1 * i as f64, CLIENT, 300))
        .chain((0..15).map(|i| (0.1 * i as f64 + 0.03, BRIDGE, 900)))
        .collect();
    net.schedule(script);
    net.run_until(20.0);

    let client_dummies = net.endpoints[CLIENT]
        .log
        .iter()
        .filter(|(_, e)| *e == Emission::Dummy)
        .count();
    let drawn = {
        // Recover the draw from a machine with the same seed and the same
        // single consumption of the RNG.
        let mut twin = FrontMachine::<f64>::new(Side::Client, Default::default(), kernel(), 33);
        twin.on_event(KernelEvent::RealPacketQueued {
            t: 0.0,
            direction: Direction::Outgoing,
            size: 300,
        })
        .unwrap();
        twin.on_event(KernelEvent::RealPacketQueued {
            t: 0.05,
            direction: Direction::Outgoing,
            size: 300,
        })
        .unwrap();
        twin.on_event(KernelEvent::WindowTick { t: 0.1 }).unwrap();
        twin.last_schedule().unwrap().times.len()
    };
    assert!(
        client_dummies <= drawn,
        "emitted {client_dummies} of {drawn} drawn"
    );
    // The stop cut the schedule short (13 s of offsets vs a ~1.5 s load).
    assert!(client_dummies < drawn);

    // After the stop, nothing but the stop signal leaves either side.
    let stop_at = net.endpoints[CLIENT]
        .log
        .iter()
        .find(|(_, e)| *e == Emission::Signal(SignalKind::StopPad))
        .map(|&(t, _)| t)
        .expect("stopped");
    for side in [CLIENT, BRIDGE] {
        for &(t, e) in &net.endpoints[side].log {
            if t > stop_at + 0.01 {
                assert!(
                    !matches!(e, Emission::Dummy),
                    "dummy after stop at {t} on side {side}: {e:?}"
                );
            }
        }
    }
}
