//! Bridge proxy: accepts wire connections, handshakes each one into a
//! defense session, and dials whatever destinations the tunneled CONNECTs
//! request.

use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use wfpad::kernel::Side;

use crate::capture::CaptureLog;
use crate::config::DefenseSettings;
use crate::handshake::bridge_handshake;
use crate::session::Session;
use crate::stream::StreamMode;

pub struct BridgeProxy {
    addr: std::net::SocketAddr,
    running: Arc<AtomicBool>,
    sessions: Arc<Mutex<Vec<Arc<Session>>>>,
}

impl BridgeProxy {
    /// Binds `listen` and serves multiplexed sessions until shutdown,
    /// dialing whatever each tunneled CONNECT asks for. Each session's
    /// machine gets a distinct seed derived from `seed`.
    pub fn start(
        listen: &str,
        settings: &DefenseSettings,
        secret: &[u8; 32],
        seed: u64,
        capture: Option<CaptureLog>,
    ) -> std::io::Result<BridgeProxy> {
        Self::start_inner(listen, settings, secret, seed, capture, None)
    }

    /// Single-stream variant: every session carries exactly one byte stream,
    /// forwarded to `forward` as soon as the session starts. No stream ids
    /// or control cells appear on the wire.
    pub fn start_forwarding(
        listen: &str,
        settings: &DefenseSettings,
        secret: &[u8; 32],
        seed: u64,
        capture: Option<CaptureLog>,
        forward: &str,
    ) -> std::io::Result<BridgeProxy> {
        Self::start_inner(
            listen,
            settings,
            secret,
            seed,
            capture,
            Some(forward.to_string()),
        )
    }

    fn start_inner(
        listen: &str,
        settings: &DefenseSettings,
        secret: &[u8; 32],
        seed: u64,
        capture: Option<CaptureLog>,
        forward: Option<String>,
    ) -> std::io::Result<BridgeProxy> {
        let listener = TcpListener::bind(listen)?;
        let addr = listener.local_addr()?;
        let running = Arc::new(AtomicBool::new(true));
        let sessions: Arc<Mutex<Vec<Arc<Session>>>> = Arc::new(Mutex::new(Vec::new()));

        let mode = match forward {
            Some(_) => StreamMode::Single,
            None => StreamMode::Multiplexed,
        };
        let settings = settings.clone();
        let secret = *secret;
        let accept_running = Arc::clone(&running);
        let accept_sessions = Arc::clone(&sessions);
        let counter = AtomicU64::new(0);
        std::thread::Builder::new()
            .name("wfpad-bridge".into())
            .spawn(move || {
                for conn in listener.incoming() {
                    if !accept_running.load(Ordering::SeqCst) {
                        break;
                    }
                    let mut conn = match conn {
                        Ok(conn) => conn,
                        Err(_) => continue,
                    };
                    // Handshake errors close the connection with nothing
                    // readable on the wire.
                    let keys = match bridge_handshake(&mut conn, &settings, &secret) {
                        Ok(keys) => keys,
                        Err(_) => continue,
                    };
                    let n = counter.fetch_add(1, Ordering::SeqCst);
                    let session = Session::start(
                        conn,
                        keys,
                        Side::Bridge,
                        &settings,
                        seed.wrapping_add(n),
                        mode,
                        capture.clone(),
                    );
                    let session = match session {
                        Ok(session) => session,
                        Err(_) => continue,
                    };
                    if let Some(forward) = &forward {
                        // Register before dialing so no early frame is lost.
                        let rx = session.register_stream(1);
                        let dest = TcpStream::connect(forward.as_str());
                        match dest {
                            Ok(dest) => {
                                let _ = dest.set_nodelay(true);
                                let pump_session = Arc::clone(&session);
                                std::thread::spawn(move || {
                                    crate::session::pump_stream(pump_session, 1, dest, rx)
                                });
                            }
                            Err(_) => {
                                session.shutdown();
                                continue;
                            }
                        }
                    }
                    accept_sessions.lock().expect("session list").push(session);
                }
            })?;

        Ok(BridgeProxy {
            addr,
            running,
            sessions,
        })
    }

    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn sessions(&self) -> Vec<Arc<Session>> {
        self.sessions.lock().expect("session list").clone()
    }

    pub fn shutdown(&self) {
        self.running.store(false, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        for session in self.sessions.lock().expect("session list").drain(..) {
            session.shutdown();
            session.join();
        }
    }
}
