//! Minimal SOCKS5 server side: no authentication, CONNECT only.

use std::io::{Read, Write};
use std::net::TcpStream;

/// CONNECT destination requested by the application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub host: String,
    pub port: u16,
}

fn io_err(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
}

/// Runs the method and request phases. On success the caller must still
/// send a reply (`reply`) before relaying data.
pub fn negotiate(stream: &mut TcpStream) -> std::io::Result<Target> {
    let mut head = [0u8; 2];
    stream.read_exact(&mut head)?;
    if head[0] != 0x05 {
        return Err(io_err("not socks5"));
    }
    let mut methods = vec![0u8; usize::from(head[1])];
    stream.read_exact(&mut methods)?;
    if !methods.contains(&0x00) {
        stream.write_all(&[0x05, 0xFF])?;
        return Err(io_err("no acceptable auth method"));
    }
    stream.write_all(&[0x05, 0x00])?;

    let mut req = [0u8; 4];
    stream.read_exact(&mut req)?;
    if req[0] != 0x05 {
        return Err(io_err("bad request version"));
    }
    if req[1] != 0x01 {
        // Only CONNECT; report "command not supported".
        reply(stream, 0x07)?;
        return Err(io_err("unsupported command"));
    }
    let host = match req[3] {
        0x01 => {
            let mut addr = [0u8; 4];
            stream.read_exact(&mut addr)?;
            std::net::Ipv4Addr::from(addr).to_string()
        }
        0x03 => {
            let mut len = [0u8; 1];
            stream.read_exact(&mut len)?;
            let mut name = vec![0u8; usize::from(len[0])];
            stream.read_exact(&mut name)?;
            String::from_utf8(name).map_err(|_| io_err("bad domain name"))?
        }
        0x04 => {
            let mut addr = [0u8; 16];
            stream.read_exact(&mut addr)?;
            std::net::Ipv6Addr::from(addr).to_string()
        }
        _ => {
            reply(stream, 0x08)?;
            return Err(io_err("bad address type"));
        }
    };
    let mut port = [0u8; 2];
    stream.read_exact(&mut port)?;
    Ok(Target {
        host,
        port: u16::from_be_bytes(port),
    })
}

/// Sends a SOCKS5 reply with the given code (0 = succeeded) and a zero
/// bind address.
pub fn reply(stream: &mut TcpStream, code: u8) -> std::io::Result<()> {
    stream.write_all(&[0x05, code, 0x00, 0x01, 0, 0, 0, 0, 0, 0])
}
