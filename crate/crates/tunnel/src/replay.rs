//! Replay harness: drives a synthetic load (an undefended trace acting as a
//! script) through a loopback client/bridge pair and captures both sides'
//! wire traces for overhead measurement.
//!
//! The client endpoint writes each outgoing packet's bytes at its script
//! timestamp; a local destination server writes each incoming packet's
//! bytes at its timestamp. Sessions run in single-stream mode, so the wire
//! carries nothing but the script bytes, the defense's cover traffic and
//! its signals.

use std::io::Read;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use wfpad::kernel::{DefenseState, Side};
use wfpad::trace::{Direction, Trace};

use crate::bridge::BridgeProxy;
use crate::capture::{CaptureLog, RevealedKind, WireTrace};
use crate::config::DefenseSettings;
use crate::handshake::client_handshake;
use crate::session::Session;
use crate::stream::StreamMode;

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub settings: DefenseSettings,
    pub secret: [u8; 32],
    pub client_seed: u64,
    pub bridge_seed: u64,
    /// Hard cap on waiting for the defense to wind down after the script,
    /// in seconds.
    pub max_drain: f64,
}

impl ReplayOptions {
    pub fn new(settings: DefenseSettings) -> Self {
        ReplayOptions {
            settings,
            secret: rand::random(),
            client_seed: 1,
            bridge_seed: 2,
            max_drain: 30.0,
        }
    }
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub client_capture: WireTrace,
    pub bridge_capture: WireTrace,
    /// Writes that missed their script timestamp by more than 10 ms.
    /// Reported, not fatal.
    pub overruns: usize,
}

/// Sleeps until `epoch + offset`, then returns how late we are, in seconds.
fn wait_for_slot(epoch: Instant, offset: f64) -> f64 {
    let target = epoch + Duration::from_secs_f64(offset.max(0.0));
    loop {
        let now = Instant::now();
        if now >= target {
            return (now - target).as_secs_f64();
        }
        std::thread::sleep(target - now);
    }
}

const OVERRUN_TOLERANCE: f64 = 0.010;

/// Runs one replay. Returns both captures once the defense has wound down.
pub fn replay(script: &Trace<f64>, options: &ReplayOptions) -> std::io::Result<ReplayOutcome> {
    let overruns = Arc::new(AtomicUsize::new(0));

    // Destination server: writes the script's incoming packets on accept.
    let server = TcpListener::bind("127.0.0.1:0")?;
    let server_addr = server.local_addr()?;
    let incoming: Vec<(f64, u32)> = script
        .iter()
        .filter(|p| p.direction == Direction::Incoming)
        .map(|p| (p.time, p.size))
        .collect();
    let server_overruns = Arc::clone(&overruns);
    let server_thread = std::thread::spawn(move || {
        let (conn, _) = match server.accept() {
            Ok(pair) => pair,
            Err(_) => return,
        };
        let _ = conn.set_nodelay(true);
        let mut drain = match conn.try_clone() {
            Ok(sock) => sock,
            Err(_) => return,
        };
        std::thread::spawn(move || {
            let mut sink = [0u8; 4096];
            while matches!(drain.read(&mut sink), Ok(n) if n > 0) {}
        });
        let epoch = Instant::now();
        let mut conn = conn;
        for (t, size) in incoming {
            let late = wait_for_slot(epoch, t);
            if late > OVERRUN_TOLERANCE {
                server_overruns.fetch_add(1, Ordering::SeqCst);
            }
            let buf = vec![0x5Au8; size as usize];
            if std::io::Write::write_all(&mut conn, &buf).is_err() {
                return;
            }
        }
    });

    // Bridge, forwarding every session straight to the server.
    let bridge_capture = CaptureLog::new();
    let bridge = BridgeProxy::start_forwarding(
        "127.0.0.1:0",
        &options.settings,
        &options.secret,
        options.bridge_seed,
        Some(bridge_capture.clone()),
        &server_addr.to_string(),
    )?;

    // Client endpoint.
    let client_capture = CaptureLog::new();
    let mut wire = TcpStream::connect(bridge.addr())?;
    let keys = client_handshake(&mut wire, &options.settings, &options.secret)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::ConnectionRefused, e.to_string()))?;
    let session = Session::start(
        wire,
        keys,
        Side::Client,
        &options.settings,
        options.client_seed,
        StreamMode::Single,
        Some(client_capture.clone()),
    )?;

    let last_t = script.packets().last().map(|p| p.time).unwrap_or(0.0);
    if !script.is_empty() {
        let rx = session.register_stream(1);
        let drain = std::thread::spawn(move || for _msg in rx {});

        let epoch = Instant::now();
        for p in script.iter().filter(|p| p.direction == Direction::Outgoing) {
            let late = wait_for_slot(epoch, p.time);
            if late > OVERRUN_TOLERANCE {
                overruns.fetch_add(1, Ordering::SeqCst);
            }
            let buf = vec![0xA5u8; p.size as usize];
            session.send_data(1, &buf);
        }
        // Let the server finish its half of the script.
        wait_for_slot(epoch, last_t + 0.05);
        drop(drain);
    } else {
        std::thread::sleep(Duration::from_millis(300));
    }

    // Wind-down: the client machine must reach Stop, and the bridge must
    // stop emitting payload and dummies (Random-WT keeps the idle token
    // circulating with signal cells, which do not count as busy).
    let drain_deadline = Instant::now() + Duration::from_secs_f64(options.max_drain);
    let mut busy_records = usize::MAX;
    let mut busy_stable_since = Instant::now();
    loop {
        let client_stopped = session.defense_state() == DefenseState::Stop;
        let now_busy = bridge_capture
            .snapshot()
            .records()
            .iter()
            .filter(|r| r.kind != RevealedKind::Signal)
            .count();
        if now_busy != busy_records {
            busy_records = now_busy;
            busy_stable_since = Instant::now();
        }
        let quiet = busy_stable_since.elapsed() > Duration::from_millis(600);
        if (client_stopped && quiet) || Instant::now() >= drain_deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(100));
    }

    session.shutdown();
    session.join();
    bridge.shutdown();
    let _ = server_thread.join();

    Ok(ReplayOutcome {
        client_capture: client_capture.snapshot(),
        bridge_capture: bridge_capture.snapshot(),
        overruns: overruns.load(Ordering::SeqCst),
    })
}
