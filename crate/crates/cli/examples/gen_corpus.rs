//! Regenerates the bundled mini-corpus under `corpus/` (page-load-like
//! full-duplex traces) and `corpus-hd/` (half-duplex traces for Random-WT).
//! Deterministic: the committed files come from exactly this program.
//!
//! Run from the workspace root: `cargo run -p wfpad-cli --example gen_corpus`

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wfpad::trace::{serialize_trace, Direction, Packet, Trace};

/// A rough page load: a request burst, then response bursts with queued
/// follow-up requests, spanning a few seconds.
fn page_load(rng: &mut StdRng) -> Trace<f64> {
    let fetches = rng.random_range(3..18);
    let mut t = 0.0;
    let mut packets = Vec::new();
    for _ in 0..fetches {
        // Request burst.
        for _ in 0..rng.random_range(1..=3) {
            packets.push(Packet::real(
                t,
                Direction::Outgoing,
                rng.random_range(100..700),
            ));
            t += rng.random_range(0.0005..0.004);
        }
        // Server think time, then the response burst.
        t += rng.random_range(0.02..0.3);
        for _ in 0..rng.random_range(4..35) {
            packets.push(Packet::real(
                t,
                Direction::Incoming,
                rng.random_range(500..1500),
            ));
            t += rng.random_range(0.0005..0.01);
        }
        // Parse/render gap before the next fetch.
        t += rng.random_range(0.05..1.2);
    }
    Trace::from_packets(packets)
}

/// Half-duplex load: strictly alternating bursts, client first, with a
/// round trip between them.
fn half_duplex_load(rng: &mut StdRng) -> Trace<f64> {
    let rounds = rng.random_range(20..60);
    let mut t = 0.0;
    let mut packets = Vec::new();
    for _ in 0..rounds {
        for _ in 0..rng.random_range(1..=6) {
            packets.push(Packet::real(
                t,
                Direction::Outgoing,
                rng.random_range(100..700),
            ));
            t += rng.random_range(0.0005..0.003);
        }
        // The round trip before the response burst.
        t += rng.random_range(0.03..0.25);
        for _ in 0..rng.random_range(3..40) {
            packets.push(Packet::real(
                t,
                Direction::Incoming,
                rng.random_range(500..1500),
            ));
            t += rng.random_range(0.0005..0.008);
        }
        t += rng.random_range(0.05..0.6);
    }
    Trace::from_packets(packets)
}

fn write(dir: &Path, name: &str, trace: &Trace<f64>) {
    std::fs::create_dir_all(dir).expect("create corpus dir");
    let path = dir.join(name);
    std::fs::write(&path, serialize_trace(trace)).expect("write trace");
    println!("{} ({} packets)", path.display(), trace.len());
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut rng = StdRng::seed_from_u64(0x00c0_ffee);
    for i in 0..12 {
        let trace = page_load(&mut rng);
        write(&root.join("corpus"), &format!("load-{i:02}.trace"), &trace);
    }
    let mut rng = StdRng::seed_from_u64(0x001f_d091);
    for i in 0..10 {
        let trace = half_duplex_load(&mut rng);
        write(&root.join("corpus-hd"), &format!("hd-{i:02}.trace"), &trace);
    }
}
