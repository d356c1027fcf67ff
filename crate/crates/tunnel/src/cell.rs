//! The fixed-size plaintext cell: 1 type byte, 2 length bytes (big-endian)
//! and a 514-byte body, zero-filled beyond the payload. Dummy cells carry
//! nothing; signal cells carry one control byte.

use thiserror::Error;

use wfpad::kernel::SignalKind;

/// Bytes of body in every cell.
pub const CELL_BODY_LEN: usize = 514;
/// Serialized plaintext cell size: type + length + body.
pub const CELL_LEN: usize = 517;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellType {
    Payload = 0,
    Dummy = 1,
    Signal = 2,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CellError {
    #[error("bad cell length")]
    BadLength,
    #[error("bad cell type or signal code")]
    BadType,
    #[error("nonzero padding beyond the payload")]
    NonZeroPadding,
}

fn signal_code(kind: SignalKind) -> u8 {
    match kind {
        SignalKind::StartPad => 0,
        SignalKind::StopPad => 1,
        SignalKind::EndBurst => 2,
    }
}

fn signal_from_code(code: u8) -> Option<SignalKind> {
    match code {
        0 => Some(SignalKind::StartPad),
        1 => Some(SignalKind::StopPad),
        2 => Some(SignalKind::EndBurst),
        _ => None,
    }
}

/// One plaintext cell. The body is always exactly [`CELL_BODY_LEN`] bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct Cell {
    cell_type: CellType,
    payload_len: u16,
    body: [u8; CELL_BODY_LEN],
}

impl std::fmt::Debug for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cell")
            .field("type", &self.cell_type)
            .field("payload_len", &self.payload_len)
            .finish()
    }
}

impl Cell {
    pub fn payload(data: &[u8]) -> Result<Self, CellError> {
        if data.len() > CELL_BODY_LEN {
            return Err(CellError::BadLength);
        }
        let mut body = [0u8; CELL_BODY_LEN];
        body[..data.len()].copy_from_slice(data);
        Ok(Cell {
            cell_type: CellType::Payload,
            payload_len: data.len() as u16,
            body,
        })
    }

    pub fn dummy() -> Self {
        Cell {
            cell_type: CellType::Dummy,
            payload_len: 0,
            body: [0u8; CELL_BODY_LEN],
        }
    }

    pub fn signal(kind: SignalKind) -> Self {
        let mut body = [0u8; CELL_BODY_LEN];
        body[0] = signal_code(kind);
        Cell {
            cell_type: CellType::Signal,
            payload_len: 1,
            body,
        }
    }

    pub fn cell_type(&self) -> CellType {
        self.cell_type
    }

    /// The meaningful prefix of the body.
    pub fn payload_bytes(&self) -> &[u8] {
        &self.body[..usize::from(self.payload_len)]
    }

    /// The control byte of a signal cell.
    pub fn signal_kind(&self) -> Option<SignalKind> {
        if self.cell_type == CellType::Signal {
            signal_from_code(self.body[0])
        } else {
            None
        }
    }

    pub fn encode(&self) -> [u8; CELL_LEN] {
        let mut out = [0u8; CELL_LEN];
        out[0] = self.cell_type as u8;
        out[1..3].copy_from_slice(&self.payload_len.to_be_bytes());
        out[3..].copy_from_slice(&self.body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CellError> {
        if bytes.len() != CELL_LEN {
            return Err(CellError::BadLength);
        }
        let cell_type = match bytes[0] {
            0 => CellType::Payload,
            1 => CellType::Dummy,
            2 => CellType::Signal,
            _ => return Err(CellError::BadType),
        };
        let payload_len = u16::from_be_bytes([bytes[1], bytes[2]]);
        if usize::from(payload_len) > CELL_BODY_LEN {
            return Err(CellError::BadLength);
        }
        match cell_type {
            CellType::Dummy if payload_len != 0 => return Err(CellError::BadLength),
            CellType::Signal if payload_len != 1 => return Err(CellError::BadLength),
            CellType::Signal if signal_from_code(bytes[3]).is_none() => {
                return Err(CellError::BadType)
            }
            _ => {}
        }
        // Uniform dummies require the tail beyond the payload to be zero.
        if bytes[3 + usize::from(payload_len)..].iter().any(|&b| b != 0) {
            return Err(CellError::NonZeroPadding);
        }
        let mut body = [0u8; CELL_BODY_LEN];
        body.copy_from_slice(&bytes[3..]);
        Ok(Cell {
            cell_type,
            payload_len,
            body,
        })
    }
}
