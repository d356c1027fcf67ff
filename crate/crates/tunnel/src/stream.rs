//! Stream framing inside payload cells.
//!
//! Multiplexed mode prefixes every payload with a 2-byte stream id, leaving
//! 512 usable bytes per cell; stream 0 is the control channel carrying
//! open/close messages. Single-stream mode uses the whole 514-byte body for
//! one unframed byte stream.

use thiserror::Error;

use crate::cell::CELL_BODY_LEN;

/// Usable payload bytes per cell in multiplexed mode.
pub const MUX_PAYLOAD: usize = CELL_BODY_LEN - 2;

pub const CONTROL_STREAM: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// One implicit stream, full 514-byte payloads, no control channel.
    Single,
    /// 2-byte stream id prefix, 512-byte payloads, control on stream 0.
    Multiplexed,
}

impl StreamMode {
    pub fn max_payload(self) -> usize {
        match self {
            StreamMode::Single => CELL_BODY_LEN,
            StreamMode::Multiplexed => MUX_PAYLOAD,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("frame too large for the cell body")]
    TooLarge,
    #[error("malformed frame")]
    Malformed,
}

/// Builds the cell payload for a data frame.
pub fn encode_frame(mode: StreamMode, stream: u16, data: &[u8]) -> Result<Vec<u8>, StreamError> {
    if data.len() > mode.max_payload() {
        return Err(StreamError::TooLarge);
    }
    match mode {
        StreamMode::Single => Ok(data.to_vec()),
        StreamMode::Multiplexed => {
            let mut out = Vec::with_capacity(2 + data.len());
            out.extend_from_slice(&stream.to_be_bytes());
            out.extend_from_slice(data);
            Ok(out)
        }
    }
}

/// Splits a received cell payload into (stream id, data).
pub fn decode_frame(mode: StreamMode, payload: &[u8]) -> Result<(u16, Vec<u8>), StreamError> {
    match mode {
        StreamMode::Single => Ok((1, payload.to_vec())),
        StreamMode::Multiplexed => {
            if payload.len() < 2 {
                return Err(StreamError::Malformed);
            }
            let stream = u16::from_be_bytes([payload[0], payload[1]]);
            Ok((stream, payload[2..].to_vec()))
        }
    }
}

/// Control-channel messages (stream 0, multiplexed mode only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlMsg {
    /// Ask the bridge to dial `host:port` for `stream`.
    Open {
        stream: u16,
        host: String,
        port: u16,
    },
    /// Dial outcome; code 0 means connected, otherwise a SOCKS reply code.
    OpenResult { stream: u16, code: u8 },
    /// No more data will flow on `stream`.
    Close { stream: u16 },
}

impl ControlMsg {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            ControlMsg::Open { stream, host, port } => {
                let host = host.as_bytes();
                debug_assert!(host.len() <= 255);
                let mut out = Vec::with_capacity(6 + host.len());
                out.push(0x01);
                out.extend_from_slice(&stream.to_be_bytes());
                out.extend_from_slice(&port.to_be_bytes());
                out.push(host.len() as u8);
                out.extend_from_slice(host);
                out
            }
            ControlMsg::OpenResult { stream, code } => {
                let mut out = Vec::with_capacity(4);
                out.push(0x02);
                out.extend_from_slice(&stream.to_be_bytes());
                out.push(*code);
                out
            }
            ControlMsg::Close { stream } => {
                let mut out = Vec::with_capacity(3);
                out.push(0x03);
                out.extend_from_slice(&stream.to_be_bytes());
                out
            }
        }
    }

    pub fn decode(data: &[u8]) -> Result<Self, StreamError> {
        match data.first() {
            Some(0x01) => {
                if data.len() < 6 {
                    return Err(StreamError::Malformed);
                }
                let stream = u16::from_be_bytes([data[1], data[2]]);
                let port = u16::from_be_bytes([data[3], data[4]]);
                let host_len = usize::from(data[5]);
                if data.len() != 6 + host_len {
                    return Err(StreamError::Malformed);
                }
                let host = String::from_utf8(data[6..].to_vec())
                    .map_err(|_| StreamError::Malformed)?;
                Ok(ControlMsg::Open { stream, host, port })
            }
            Some(0x02) if data.len() == 4 => Ok(ControlMsg::OpenResult {
                stream: u16::from_be_bytes([data[1], data[2]]),
                code: data[3],
            }),
            Some(0x03) if data.len() == 3 => Ok(ControlMsg::Close {
                stream: u16::from_be_bytes([data[1], data[2]]),
            }),
            _ => Err(StreamError::Malformed),
        }
    }
}
