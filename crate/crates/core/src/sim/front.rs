//! FRONT simulation: draw one dummy schedule per side, merge it with the
//! unmodified real trace, and drop scheduled dummies that fall after the
//! last real packet (the defense would have stopped by then).

use rand::Rng;

use crate::defense::front::{front_schedule, FrontConfig};
use crate::num::Scalar;
use crate::trace::{Direction, Packet, Trace};
use crate::DUMMY_CELL_BYTES;

/// Simulates FRONT over an undefended trace. Real packets pass through
/// byte-identical; the outgoing schedule is drawn before the incoming one.
pub fn simulate_front<T: Scalar, R: Rng + ?Sized>(
    trace: &Trace<T>,
    config: &FrontConfig<T>,
    rng: &mut R,
) -> Trace<T> {
    let last_real = match trace.last_real_time() {
        Some(t) => t,
        None => return trace.clone(),
    };

    let mut packets: Vec<Packet<T>> = trace.iter().copied().collect();
    for direction in [Direction::Outgoing, Direction::Incoming] {
        let schedule = front_schedule(direction, config, rng);
        packets.extend(
            schedule
                .times
                .iter()
                .take_while(|&&t| t <= last_real)
                .map(|&t| Packet::dummy(t, direction, DUMMY_CELL_BYTES)),
        );
    }
    Trace::from_packets(packets)
}
