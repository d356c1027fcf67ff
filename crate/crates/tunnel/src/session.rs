//! One defense session over one TCP connection.
//!
//! A session runs two threads. The core thread owns the defense machine,
//! the timer heap and the wire writer: every defense-state mutation happens
//! there, serialized through one event queue. The reader thread opens
//! incoming records and dispatches payload frames to streams, signals to
//! the core thread, and dummies to nowhere. Timer semantics follow the
//! kernel contract: re-arming replaces, cancelled timers never fire.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU16, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use wfpad::kernel::{
    DefenseMachine, DefenseState, KernelAction, KernelEvent, Side, SignalKind, TimerId,
};

use crate::capture::{CaptureLog, RevealedKind, WireRecord};
use crate::cell::{Cell, CellType};
use crate::config::DefenseSettings;
use crate::handshake::SessionKeys;
use crate::seal::{ChaChaSealer, Sealer};
use crate::stream::{decode_frame, encode_frame, ControlMsg, StreamMode, CONTROL_STREAM};

/// Messages delivered to a stream's consumer.
#[derive(Debug, PartialEq, Eq)]
pub enum StreamMsg {
    Data(Vec<u8>),
    Close,
}

enum CoreEvent {
    /// One ready cell-payload frame of real data.
    Frame(Vec<u8>),
    /// A signal cell arrived from the peer.
    Signal(SignalKind),
    Shutdown,
}

struct Shared {
    epoch: Instant,
    side: Side,
    mode: StreamMode,
    sock: TcpStream,
    streams: Mutex<HashMap<u16, Sender<StreamMsg>>>,
    open_waiters: Mutex<HashMap<u16, Sender<u8>>>,
    capture: Option<CaptureLog>,
    alive: AtomicBool,
    state: Mutex<DefenseState>,
}

impl Shared {
    fn elapsed(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64()
    }

    fn log(&self, direction: wfpad::trace::Direction, len: usize, kind: RevealedKind) {
        if let Some(capture) = &self.capture {
            capture.push(WireRecord {
                t: self.elapsed(),
                direction,
                len,
                kind,
            });
        }
    }

    fn drop_streams(&self) {
        let mut streams = self.streams.lock().expect("stream table lock");
        for (_, tx) in streams.drain() {
            let _ = tx.send(StreamMsg::Close);
        }
        drop(streams);
        // Dropping the ack senders unblocks any open_stream waiter.
        self.open_waiters.lock().expect("waiters lock").clear();
    }
}

/// A live session. Dropping it does not tear the session down; call
/// [`Session::shutdown`].
pub struct Session {
    shared: Arc<Shared>,
    core_tx: Sender<CoreEvent>,
    next_stream: AtomicU16,
    handles: Mutex<Vec<JoinHandle<()>>>,
}

impl Session {
    /// Starts the session threads over an established, handshaken stream.
    pub fn start(
        sock: TcpStream,
        keys: SessionKeys,
        side: Side,
        settings: &DefenseSettings,
        seed: u64,
        mode: StreamMode,
        capture: Option<CaptureLog>,
    ) -> std::io::Result<Arc<Session>> {
        sock.set_nodelay(true)?;
        let machine = settings.build_machine(side, seed);
        let seal_tx: Box<dyn Sealer> = Box::new(ChaChaSealer::new(&keys.tx));
        let seal_rx: Box<dyn Sealer> = Box::new(ChaChaSealer::new(&keys.rx));

        let shared = Arc::new(Shared {
            epoch: Instant::now(),
            side,
            mode,
            sock: sock.try_clone()?,
            streams: Mutex::new(HashMap::new()),
            open_waiters: Mutex::new(HashMap::new()),
            capture,
            alive: AtomicBool::new(true),
            state: Mutex::new(DefenseState::Stop),
        });

        let (core_tx, core_rx) = mpsc::channel();
        let session = Arc::new(Session {
            shared: Arc::clone(&shared),
            core_tx: core_tx.clone(),
            next_stream: AtomicU16::new(1),
            handles: Mutex::new(Vec::new()),
        });

        let writer = sock.try_clone()?;
        let tick = Duration::from_secs_f64(settings.kernel.tick_interval);
        let core_shared = Arc::clone(&shared);
        let core = std::thread::Builder::new()
            .name("wfpad-core".into())
            .spawn(move || core_loop(core_shared, machine, seal_tx, writer, core_rx, tick))?;

        let reader_shared = Arc::clone(&shared);
        let reader_session = Arc::clone(&session);
        let reader = std::thread::Builder::new()
            .name("wfpad-reader".into())
            .spawn(move || reader_loop(reader_shared, seal_rx, sock, core_tx, reader_session))?;

        session.handles.lock().expect("handles lock").extend([core, reader]);
        Ok(session)
    }

    pub fn is_alive(&self) -> bool {
        self.shared.alive.load(Ordering::SeqCst)
    }

    /// Most recent state announced by the defense machine.
    pub fn defense_state(&self) -> DefenseState {
        *self.shared.state.lock().expect("state lock")
    }

    pub fn capture(&self) -> Option<&CaptureLog> {
        self.shared.capture.as_ref()
    }

    /// Queues application bytes on a stream, split into cell-sized frames.
    pub fn send_data(&self, stream: u16, data: &[u8]) {
        for chunk in data.chunks(self.shared.mode.max_payload().max(1)) {
            if let Ok(frame) = encode_frame(self.shared.mode, stream, chunk) {
                let _ = self.core_tx.send(CoreEvent::Frame(frame));
            }
        }
    }

    pub fn send_control(&self, msg: &ControlMsg) {
        // Single-stream mode has no control channel.
        if self.shared.mode != StreamMode::Multiplexed {
            return;
        }
        if let Ok(frame) = encode_frame(self.shared.mode, CONTROL_STREAM, &msg.encode()) {
            let _ = self.core_tx.send(CoreEvent::Frame(frame));
        }
    }

    /// Client side: asks the bridge to dial `host:port`. Returns the stream
    /// id and the receiver of inbound data once the bridge reports success.
    pub fn open_stream(
        &self,
        host: &str,
        port: u16,
        timeout: Duration,
    ) -> Result<(u16, Receiver<StreamMsg>), u8> {
        let stream = self.next_stream.fetch_add(1, Ordering::SeqCst);
        let (data_tx, data_rx) = mpsc::channel();
        let (ack_tx, ack_rx) = mpsc::channel();
        self.shared
            .streams
            .lock()
            .expect("stream table lock")
            .insert(stream, data_tx);
        self.shared
            .open_waiters
            .lock()
            .expect("waiters lock")
            .insert(stream, ack_tx);
        self.send_control(&ControlMsg::Open {
            stream,
            host: host.to_string(),
            port,
        });
        match ack_rx.recv_timeout(timeout) {
            Ok(0) => Ok((stream, data_rx)),
            Ok(code) => {
                self.forget_stream(stream);
                Err(code)
            }
            Err(_) => {
                self.forget_stream(stream);
                Err(1)
            }
        }
    }

    /// Registers a stream the local end is serving (bridge side).
    pub fn register_stream(&self, stream: u16) -> Receiver<StreamMsg> {
        let (data_tx, data_rx) = mpsc::channel();
        self.shared
            .streams
            .lock()
            .expect("stream table lock")
            .insert(stream, data_tx);
        data_rx
    }

    pub fn close_stream(&self, stream: u16) {
        self.forget_stream(stream);
        self.send_control(&ControlMsg::Close { stream });
    }

    fn forget_stream(&self, stream: u16) {
        self.shared
            .streams
            .lock()
            .expect("stream table lock")
            .remove(&stream);
        self.shared
            .open_waiters
            .lock()
            .expect("waiters lock")
            .remove(&stream);
    }

    /// Stops the session and unblocks both threads.
    pub fn shutdown(&self) {
        self.shared.alive.store(false, Ordering::SeqCst);
        let _ = self.core_tx.send(CoreEvent::Shutdown);
        let _ = self.shared.sock.shutdown(Shutdown::Both);
    }

    /// Waits for the session threads to finish.
    pub fn join(&self) {
        let handles: Vec<_> = self.handles.lock().expect("handles lock").drain(..).collect();
        for handle in handles {
            let _ = handle.join();
        }
    }
}

/// The timer heap with replace-on-arm and cancellation semantics.
struct Timers {
    heap: BinaryHeap<Reverse<(Instant, u64, u32)>>,
    live: HashMap<TimerId, u64>,
    next_seq: u64,
}

impl Timers {
    fn new() -> Self {
        Timers {
            heap: BinaryHeap::new(),
            live: HashMap::new(),
            next_seq: 0,
        }
    }

    fn arm(&mut self, timer: TimerId, deadline: Instant) {
        self.next_seq += 1;
        self.live.insert(timer, self.next_seq);
        self.heap.push(Reverse((deadline, self.next_seq, timer.0)));
    }

    fn cancel(&mut self, timer: TimerId) {
        self.live.remove(&timer);
    }

    fn cancel_all(&mut self) {
        self.live.clear();
    }

    /// The next timer due at or before `now`, skipping stale entries.
    fn pop_due(&mut self, now: Instant) -> Option<TimerId> {
        while let Some(&Reverse((deadline, seq, id))) = self.heap.peek() {
            if deadline > now {
                return None;
            }
            self.heap.pop();
            let timer = TimerId(id);
            if self.live.get(&timer) == Some(&seq) {
                self.live.remove(&timer);
                return Some(timer);
            }
        }
        None
    }

    fn next_deadline(&self) -> Option<Instant> {
        // Stale heads are fine here; they only cause an early wake.
        self.heap.peek().map(|&Reverse((deadline, _, _))| deadline)
    }
}

fn core_loop(
    shared: Arc<Shared>,
    mut machine: Box<dyn DefenseMachine<f64>>,
    sealer: Box<dyn Sealer>,
    mut writer: TcpStream,
    rx: Receiver<CoreEvent>,
    tick: Duration,
) {
    let mut timers = Timers::new();
    let mut pending: VecDeque<Vec<u8>> = VecDeque::new();
    let mut seq_tx: u64 = 0;

    let apply = |actions: Vec<KernelAction<f64>>,
                     timers: &mut Timers,
                     pending: &mut VecDeque<Vec<u8>>,
                     seq_tx: &mut u64,
                     writer: &mut TcpStream|
     -> std::io::Result<()> {
        for action in actions {
            let cell = match action {
                KernelAction::SendReal { bytes } => {
                    let frame = pending.pop_front().unwrap_or_default();
                    debug_assert_eq!(frame.len() as u32, bytes);
                    Some((Cell::payload(&frame).expect("frame fits cell"), RevealedKind::Real))
                }
                KernelAction::SendDummy => Some((Cell::dummy(), RevealedKind::Dummy)),
                KernelAction::SendSignal(kind) => {
                    Some((Cell::signal(kind), RevealedKind::Signal))
                }
                KernelAction::ArmTimer { timer, delay } => {
                    let delay = Duration::from_secs_f64(delay.max(0.0));
                    timers.arm(timer, Instant::now() + delay);
                    None
                }
                KernelAction::CancelTimer(timer) => {
                    timers.cancel(timer);
                    None
                }
                KernelAction::CancelAllTimers => {
                    timers.cancel_all();
                    None
                }
                KernelAction::EnterState(state) => {
                    *shared.state.lock().expect("state lock") = state;
                    None
                }
            };
            if let Some((cell, kind)) = cell {
                let record = sealer.seal(*seq_tx, &cell.encode());
                *seq_tx += 1;
                writer.write_all(&record)?;
                shared.log(shared.side.send_direction(), record.len(), kind);
            }
        }
        Ok(())
    };

    let initial = machine.initial_actions();
    if apply(initial, &mut timers, &mut pending, &mut seq_tx, &mut writer).is_err() {
        shared.alive.store(false, Ordering::SeqCst);
        return;
    }

    let mut next_tick = Instant::now() + tick;
    'core: loop {
        if !shared.alive.load(Ordering::SeqCst) {
            break;
        }
        let now = Instant::now();
        while let Some(timer) = timers.pop_due(now) {
            let event = KernelEvent::TimerFired {
                t: shared.elapsed(),
                timer,
            };
            match machine.on_event(event) {
                Ok(actions) => {
                    if apply(actions, &mut timers, &mut pending, &mut seq_tx, &mut writer)
                        .is_err()
                    {
                        break 'core;
                    }
                }
                Err(_) => break 'core,
            }
        }
        if Instant::now() >= next_tick {
            let event = KernelEvent::WindowTick {
                t: shared.elapsed(),
            };
            match machine.on_event(event) {
                Ok(actions) => {
                    if apply(actions, &mut timers, &mut pending, &mut seq_tx, &mut writer)
                        .is_err()
                    {
                        break 'core;
                    }
                }
                Err(_) => break 'core,
            }
            next_tick = Instant::now() + tick;
        }

        let wake = match timers.next_deadline() {
            Some(deadline) => deadline.min(next_tick),
            None => next_tick,
        };
        let timeout = wake.saturating_duration_since(Instant::now());
        let incoming = match rx.recv_timeout(timeout) {
            Ok(event) => event,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        match incoming {
            CoreEvent::Frame(frame) => {
                let t = shared.elapsed();
                let size = frame.len() as u32;
                pending.push_back(frame);
                let queued = KernelEvent::RealPacketQueued {
                    t,
                    direction: shared.side.send_direction(),
                    size,
                };
                // The window predicate is also evaluated on every arrival.
                let tick_now = KernelEvent::WindowTick { t };
                for event in [queued, tick_now] {
                    match machine.on_event(event) {
                        Ok(actions) => {
                            if apply(actions, &mut timers, &mut pending, &mut seq_tx, &mut writer)
                                .is_err()
                            {
                                break 'core;
                            }
                        }
                        Err(_) => break 'core,
                    }
                }
            }
            CoreEvent::Signal(kind) => {
                let event = KernelEvent::PeerSignal {
                    t: shared.elapsed(),
                    signal: kind,
                };
                match machine.on_event(event) {
                    Ok(actions) => {
                        if apply(actions, &mut timers, &mut pending, &mut seq_tx, &mut writer)
                            .is_err()
                        {
                            break 'core;
                        }
                    }
                    // A protocol violation kills the session.
                    Err(_) => break 'core,
                }
            }
            CoreEvent::Shutdown => break,
        }
    }

    shared.alive.store(false, Ordering::SeqCst);
    let _ = shared.sock.shutdown(Shutdown::Both);
    shared.drop_streams();
}

fn reader_loop(
    shared: Arc<Shared>,
    sealer: Box<dyn Sealer>,
    mut sock: TcpStream,
    core_tx: Sender<CoreEvent>,
    session: Arc<Session>,
) {
    let record_len = sealer.record_len();
    let mut buf = vec![0u8; record_len];
    let mut seq: u64 = 0;
    loop {
        if sock.read_exact(&mut buf).is_err() {
            break;
        }
        let cell_bytes = match sealer.open(seq, &buf) {
            Ok(bytes) => bytes,
            // Tampering or a peer with the wrong keys: fail closed.
            Err(_) => break,
        };
        seq += 1;
        let cell = match Cell::decode(&cell_bytes) {
            Ok(cell) => cell,
            Err(_) => break,
        };
        let kind = match cell.cell_type() {
            CellType::Payload => RevealedKind::Real,
            CellType::Dummy => RevealedKind::Dummy,
            CellType::Signal => RevealedKind::Signal,
        };
        shared.log(shared.side.send_direction().flip(), record_len, kind);

        match cell.cell_type() {
            CellType::Dummy => {}
            CellType::Signal => {
                if let Some(kind) = cell.signal_kind() {
                    if core_tx.send(CoreEvent::Signal(kind)).is_err() {
                        break;
                    }
                }
            }
            CellType::Payload => {
                let (stream, data) = match decode_frame(shared.mode, cell.payload_bytes()) {
                    Ok(parts) => parts,
                    Err(_) => break,
                };
                if shared.mode == StreamMode::Multiplexed && stream == CONTROL_STREAM {
                    match ControlMsg::decode(&data) {
                        Ok(msg) => handle_control(&shared, &session, msg),
                        Err(_) => break,
                    }
                } else {
                    let streams = shared.streams.lock().expect("stream table lock");
                    if let Some(tx) = streams.get(&stream) {
                        let _ = tx.send(StreamMsg::Data(data));
                    }
                }
            }
        }
    }
    shared.alive.store(false, Ordering::SeqCst);
    let _ = core_tx.send(CoreEvent::Shutdown);
    shared.drop_streams();
}

fn handle_control(shared: &Arc<Shared>, session: &Arc<Session>, msg: ControlMsg) {
    match (shared.side, msg) {
        (Side::Client, ControlMsg::OpenResult { stream, code }) => {
            let waiter = shared
                .open_waiters
                .lock()
                .expect("waiters lock")
                .remove(&stream);
            if let Some(tx) = waiter {
                let _ = tx.send(code);
            }
        }
        (Side::Bridge, ControlMsg::Open { stream, host, port }) => {
            let session = Arc::clone(session);
            std::thread::spawn(move || bridge_dial(session, stream, host, port));
        }
        (_, ControlMsg::Close { stream }) => {
            let tx = shared
                .streams
                .lock()
                .expect("stream table lock")
                .remove(&stream);
            if let Some(tx) = tx {
                let _ = tx.send(StreamMsg::Close);
            }
        }
        // Anything else is a peer speaking the wrong role; ignore.
        _ => {}
    }
}

/// Bridge side of one stream: dial the destination and pump both ways.
fn bridge_dial(session: Arc<Session>, stream: u16, host: String, port: u16) {
    use std::net::ToSocketAddrs;
    let addr = match (host.as_str(), port).to_socket_addrs() {
        Ok(mut addrs) => addrs.next(),
        Err(_) => None,
    };
    let dest = match addr {
        Some(addr) => TcpStream::connect_timeout(&addr, Duration::from_secs(10)),
        None => Err(std::io::Error::from(std::io::ErrorKind::NotFound)),
    };
    let dest = match dest {
        Ok(dest) => dest,
        Err(err) => {
            let code = match err.kind() {
                std::io::ErrorKind::ConnectionRefused => 5,
                std::io::ErrorKind::NotFound => 4,
                _ => 1,
            };
            session.send_control(&ControlMsg::OpenResult { stream, code });
            return;
        }
    };
    let _ = dest.set_nodelay(true);
    let rx = session.register_stream(stream);
    session.send_control(&ControlMsg::OpenResult { stream, code: 0 });
    pump_stream(session, stream, dest, rx);
}

/// Pumps one local socket against one tunnel stream until either side
/// closes. Used by both the bridge (destination socket) and the client
/// (application socket).
pub fn pump_stream(session: Arc<Session>, stream: u16, local: TcpStream, rx: Receiver<StreamMsg>) {
    let mut read_half = match local.try_clone() {
        Ok(sock) => sock,
        Err(_) => return,
    };
    let to_tunnel = {
        let session = Arc::clone(&session);
        let max = crate::stream::StreamMode::Multiplexed.max_payload();
        std::thread::spawn(move || {
            let mut buf = vec![0u8; max];
            loop {
                match read_half.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => session.send_data(stream, &buf[..n]),
                }
            }
            session.close_stream(stream);
        })
    };

    let mut write_half = local;
    for msg in rx {
        match msg {
            StreamMsg::Data(data) => {
                if write_half.write_all(&data).is_err() {
                    break;
                }
            }
            StreamMsg::Close => break,
        }
    }
    let _ = write_half.shutdown(Shutdown::Both);
    let _ = to_tunnel.join();
}
