//! Client proxy: a local SOCKS5 listener in front of one defense session to
//! the bridge. All SOCKS connections share the session, multiplexed by
//! stream id.

use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use wfpad::kernel::Side;

use crate::capture::CaptureLog;
use crate::config::DefenseSettings;
use crate::handshake::client_handshake;
use crate::session::{pump_stream, Session};
use crate::socks;
use crate::stream::StreamMode;

pub struct ClientProxy {
    session: Arc<Session>,
    listener_addr: std::net::SocketAddr,
    running: Arc<AtomicBool>,
}

impl ClientProxy {
    /// Dials the bridge, performs the handshake, and starts accepting SOCKS
    /// connections on `listen`.
    pub fn start(
        listen: &str,
        bridge: &str,
        settings: &DefenseSettings,
        secret: &[u8; 32],
        seed: u64,
        capture: Option<CaptureLog>,
    ) -> std::io::Result<ClientProxy> {
        let mut wire = TcpStream::connect(bridge)?;
        let keys = client_handshake(&mut wire, settings, secret).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::ConnectionRefused, e.to_string())
        })?;
        let session = Session::start(
            wire,
            keys,
            Side::Client,
            settings,
            seed,
            StreamMode::Multiplexed,
            capture,
        )?;

        let listener = TcpListener::bind(listen)?;
        let listener_addr = listener.local_addr()?;
        let running = Arc::new(AtomicBool::new(true));

        let accept_session = Arc::clone(&session);
        let accept_running = Arc::clone(&running);
        std::thread::Builder::new()
            .name("wfpad-socks".into())
            .spawn(move || {
                for conn in listener.incoming() {
                    if !accept_running.load(Ordering::SeqCst) {
                        break;
                    }
                    let conn = match conn {
                        Ok(conn) => conn,
                        Err(_) => continue,
                    };
                    let session = Arc::clone(&accept_session);
                    std::thread::spawn(move || serve_socks(session, conn));
                }
            })?;

        Ok(ClientProxy {
            session,
            listener_addr,
            running,
        })
    }

    pub fn socks_addr(&self) -> std::net::SocketAddr {
        self.listener_addr
    }

    pub fn session(&self) -> &Arc<Session> {
        &self.session
    }

    pub fn shutdown(&self) {
        self.running.store(false, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.listener_addr);
        self.session.shutdown();
        self.session.join();
    }
}

fn serve_socks(session: Arc<Session>, mut conn: TcpStream) {
    let target = match socks::negotiate(&mut conn) {
        Ok(target) => target,
        Err(_) => return,
    };
    match session.open_stream(&target.host, target.port, Duration::from_secs(15)) {
        Ok((stream, rx)) => {
            if socks::reply(&mut conn, 0).is_err() {
                session.close_stream(stream);
                return;
            }
            let _ = conn.set_nodelay(true);
            pump_stream(session, stream, conn, rx);
        }
        Err(code) => {
            let _ = socks::reply(&mut conn, code);
        }
    }
}
