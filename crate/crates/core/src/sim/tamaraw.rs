//! Tamaraw simulation: the timeline of each direction is divided into slots
//! of width rho, each real packet is assigned to the earliest feasible slot
//! no earlier than its original timestamp, unfilled slots up to the last
//! assignment become dummies, and each direction is padded to a multiple of
//! `L` cells.

use crate::defense::tamaraw::TamarawConfig;
use crate::num::Scalar;
use crate::sim::SimulationStrategy;
use crate::trace::{Direction, Packet, PacketKind, Trace};
use crate::DUMMY_CELL_BYTES;

/// One direction's slot timeline. Slot `k` is at `origin + k * period` and
/// holds at most one packet.
#[derive(Debug, Clone)]
pub struct SlotGrid<T> {
    direction: Direction,
    period: T,
    origin: T,
    /// Indices of occupied slots, in assignment order (always increasing).
    occupied: Vec<u64>,
}

impl<T: Scalar> SlotGrid<T> {
    pub fn new(direction: Direction, period: T, origin: T) -> Self {
        debug_assert!(period > T::zero());
        SlotGrid {
            direction,
            period,
            origin,
            occupied: Vec::new(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The timestamp of slot `k`.
    pub fn slot_time(&self, k: u64) -> T {
        self.origin + T::from_u64(k).expect("slot index fits scalar") * self.period
    }

    /// First slot index whose time is `>= t`, by the same comparison the
    /// assignment uses.
    fn first_slot_at(&self, t: T) -> u64 {
        if t <= self.origin {
            return 0;
        }
        let mut k = ((t - self.origin) / self.period)
            .ceil()
            .to_u64()
            .expect("slot index fits u64");
        // Guard against rounding in the division: land on the first k with
        // slot_time(k) >= t exactly as slot_time computes it.
        while k > 0 && self.slot_time(k - 1) >= t {
            k -= 1;
        }
        while self.slot_time(k) < t {
            k += 1;
        }
        k
    }

    /// Assigns the earliest free slot at or after time `lower_bound`.
    /// Assignments must arrive with non-decreasing bounds.
    pub fn assign(&mut self, lower_bound: T) -> u64 {
        let k0 = self.first_slot_at(lower_bound);
        let k = match self.occupied.last() {
            Some(&last) => k0.max(last + 1),
            None => k0,
        };
        self.occupied.push(k);
        k
    }

    pub fn occupied(&self) -> &[u64] {
        &self.occupied
    }
}

/// Simulates Tamaraw over an undefended trace. Only real packets of the
/// input are considered; their sizes are preserved, and inserted dummies are
/// cell-sized.
pub fn simulate_tamaraw<T: Scalar>(
    trace: &Trace<T>,
    config: &TamarawConfig<T>,
    strategy: SimulationStrategy,
) -> Trace<T> {
    let mut out_grid = SlotGrid::new(Direction::Outgoing, config.rho_out, T::zero());
    let mut in_grid = SlotGrid::new(Direction::Incoming, config.rho_in, T::zero());

    // Assigned slot per real packet, in trace order.
    let mut assigned: Vec<(Direction, u64, u32)> = Vec::new();
    // Latest assigned emission time per direction, for the pessimistic
    // cross-direction constraint.
    let mut last_time: [Option<T>; 2] = [None, None];

    for p in trace.iter().filter(|p| p.kind == PacketKind::Real) {
        let (grid, other) = match p.direction {
            Direction::Outgoing => (&mut out_grid, 1),
            Direction::Incoming => (&mut in_grid, 0),
        };
        let mut bound = p.time;
        if strategy == SimulationStrategy::Pessimistic {
            if let Some(t) = last_time[other] {
                if t > bound {
                    bound = t;
                }
            }
        }
        let k = grid.assign(bound);
        let t = grid.slot_time(k);
        let own = 1 - other;
        last_time[own] = Some(match last_time[own] {
            Some(prev) if prev > t => prev,
            _ => t,
        });
        assigned.push((p.direction, k, p.size));
    }

    let mut packets = Vec::new();
    for grid in [&out_grid, &in_grid] {
        let occupied = grid.occupied();
        if occupied.is_empty() {
            continue;
        }
        let sizes: Vec<u32> = assigned
            .iter()
            .filter(|(d, _, _)| *d == grid.direction())
            .map(|&(_, _, s)| s)
            .collect();
        let last = *occupied.last().expect("non-empty");
        let mut real_iter = occupied.iter().zip(sizes).peekable();
        let mut count: u64 = 0;
        let mut k = 0;
        let multiple = u64::from(config.length_multiple).max(1);
        while k <= last || !count.is_multiple_of(multiple) {
            let packet = match real_iter.peek() {
                Some(&(&slot, size)) if slot == k => {
                    real_iter.next();
                    Packet::real(grid.slot_time(k), grid.direction(), size)
                }
                _ => Packet::dummy(grid.slot_time(k), grid.direction(), DUMMY_CELL_BYTES),
            };
            packets.push(packet);
            count += 1;
            k += 1;
        }
    }

    Trace::from_packets(packets)
}
