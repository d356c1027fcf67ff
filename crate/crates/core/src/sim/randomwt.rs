//! Random-WT simulation over a half-duplex trace: each real burst gains a
//! random dummy tail at the timestamp of its last packet (padding adds no
//! delay), and with probability `p_fake` an inter-burst gap receives one
//! fake request/response pair whose spacing is a fake RTT sampled around the
//! most recently observed real round trip. Everything after an inserted
//! pair is delayed by that fake RTT.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::defense::randomwt::{pad_real_burst, RandomWtConfig};
use crate::num::Scalar;
use crate::trace::{Direction, Packet, PacketKind, Trace};
use crate::DUMMY_CELL_BYTES;

/// How to read the dispersion parameter of the fake-RTT distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RttSpread {
    /// `0.1 * tau` is the variance of the normal distribution.
    #[default]
    LiteralVariance,
    /// `0.1 * tau` is its standard deviation.
    StdFraction,
}

/// Fake round-trip model: normal with mean `tau`, truncated below at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FakeRttModel<T> {
    /// Latest observed real round trip, in seconds.
    pub tau: T,
    pub spread: RttSpread,
}

impl<T: Scalar> FakeRttModel<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let mean = self.tau.to_f64_lossy();
        let std = match self.spread {
            RttSpread::LiteralVariance => (0.1 * mean).max(0.0).sqrt(),
            RttSpread::StdFraction => (0.1 * mean).max(0.0),
        };
        let normal = Normal::new(mean, std).expect("finite mean and std");
        for _ in 0..64 {
            let v = normal.sample(rng);
            if v >= 0.0 {
                return T::from_f64_lossy(v);
            }
        }
        T::zero()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    /// Two packets of opposite direction share a timestamp, so the trace
    /// cannot have been captured in half-duplex mode.
    #[error("trace is not half-duplex: ambiguous direction change at packet {index}")]
    NotHalfDuplex { index: usize },
}

/// Simulates Random-WT with the default literal-variance RTT model.
pub fn simulate_randomwt<T: Scalar, R: Rng + ?Sized>(
    trace: &Trace<T>,
    config: &RandomWtConfig<T>,
    rng: &mut R,
) -> Result<Trace<T>, SimError> {
    simulate_randomwt_with(trace, config, RttSpread::LiteralVariance, rng)
}

/// Simulates Random-WT over a half-duplex trace. Only real packets of the
/// input are considered. Bursts are maximal same-direction runs; a gap
/// between bursts is eligible for one fake pair once a real round trip has
/// been observed.
pub fn simulate_randomwt_with<T: Scalar, R: Rng + ?Sized>(
    trace: &Trace<T>,
    config: &RandomWtConfig<T>,
    spread: RttSpread,
    rng: &mut R,
) -> Result<Trace<T>, SimError> {
    let reals: Vec<&Packet<T>> = trace
        .iter()
        .filter(|p| p.kind == PacketKind::Real)
        .collect();
    for (i, pair) in reals.windows(2).enumerate() {
        if pair[0].direction != pair[1].direction && pair[0].time == pair[1].time {
            return Err(SimError::NotHalfDuplex { index: i + 1 });
        }
    }

    let mut bursts: Vec<Vec<&Packet<T>>> = Vec::new();
    for &p in &reals {
        match bursts.last_mut() {
            Some(burst) if burst[0].direction == p.direction => burst.push(p),
            _ => bursts.push(vec![p]),
        }
    }

    let mut out: Vec<Packet<T>> = Vec::new();
    let mut shift = T::zero();
    let mut last_rtt: Option<T> = None;

    for (i, burst) in bursts.iter().enumerate() {
        let direction = burst[0].direction;
        for p in burst {
            out.push(Packet {
                time: p.time + shift,
                ..**p
            });
        }
        let burst_end = burst.last().expect("bursts are non-empty").time;

        // Tail padding rides on the last real packet of the burst.
        let padded = pad_real_burst(burst.len() as u32, direction, config, rng);
        for _ in 0..padded.dummy_count {
            out.push(Packet::dummy(burst_end + shift, direction, DUMMY_CELL_BYTES));
        }

        if let Some(next) = bursts.get(i + 1) {
            let next_start = next[0].time;
            if direction == Direction::Outgoing && next[0].direction == Direction::Incoming {
                last_rtt = Some(next_start - burst_end);
            }
            if let Some(tau) = last_rtt {
                if rng.random::<f64>() < config.p_fake.to_f64_lossy() {
                    let request = rng.random_range(0..=config.n_fake_out);
                    let response = rng.random_range(0..=config.n_fake_in);
                    let tau_fake = FakeRttModel { tau, spread }.sample(rng);
                    let t_request = burst_end + shift;
                    for _ in 0..request {
                        out.push(Packet::dummy(
                            t_request,
                            Direction::Outgoing,
                            DUMMY_CELL_BYTES,
                        ));
                    }
                    let t_response = t_request + tau_fake;
                    for _ in 0..response {
                        out.push(Packet::dummy(
                            t_response,
                            Direction::Incoming,
                            DUMMY_CELL_BYTES,
                        ));
                    }
                    shift += tau_fake;
                }
            }
        }
    }

    Ok(Trace::from_packets(out))
}
