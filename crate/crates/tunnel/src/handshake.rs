//! Pre-shared-secret handshake. The client opens with
//! `magic(4) || version(1) || defense-id(1) || param-hash(32) || nonce(32)`;
//! the bridge answers `version(1) || nonce(32) || proof(32)` where the proof
//! is an HMAC over the transcript keyed by the shared secret. Per-direction
//! sealing keys are derived from the secret and both nonces. A client that
//! does not know the secret produces records the bridge cannot open, so it
//! learns nothing beyond the fixed-size reply; on any mismatch the
//! connection is closed without a readable error.

use std::io::{Read, Write};

use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::DefenseSettings;

pub const MAGIC: [u8; 4] = *b"WFP1";
pub const VERSION: u8 = 1;

const HELLO_LEN: usize = 4 + 1 + 1 + 32 + 32;
const REPLY_LEN: usize = 1 + 32 + 32;

#[derive(Debug, Error)]
pub enum HandshakeError {
    #[error("i/o during handshake: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer did not prove knowledge of the secret")]
    AuthFailure,
    #[error("client parameters do not match the bridge's")]
    ParamMismatch,
    #[error("not a protocol hello")]
    BadMagic,
    #[error("unsupported protocol version")]
    BadVersion,
}

/// Per-direction sealing keys for one established session.
pub struct SessionKeys {
    pub tx: [u8; 32],
    pub rx: [u8; 32],
}

fn proof(secret: &[u8; 32], hello: &[u8], bridge_nonce: &[u8; 32]) -> [u8; 32] {
    let mut mac =
        Hmac::<Sha256>::new_from_slice(secret).expect("hmac accepts 32-byte keys");
    mac.update(b"wfpad/proof/v1");
    mac.update(hello);
    mac.update(bridge_nonce);
    mac.finalize().into_bytes().into()
}

fn derive_keys(
    secret: &[u8; 32],
    client_nonce: &[u8; 32],
    bridge_nonce: &[u8; 32],
) -> ([u8; 32], [u8; 32]) {
    let mut salt = Vec::with_capacity(64);
    salt.extend_from_slice(client_nonce);
    salt.extend_from_slice(bridge_nonce);
    let hk = Hkdf::<Sha256>::new(Some(&salt), secret);
    let mut c2b = [0u8; 32];
    let mut b2c = [0u8; 32];
    hk.expand(b"wfpad/key/c2b", &mut c2b).expect("valid length");
    hk.expand(b"wfpad/key/b2c", &mut b2c).expect("valid length");
    (c2b, b2c)
}

/// Runs the client side. On success the returned keys are `tx` for
/// client-to-bridge records and `rx` for the reverse direction.
pub fn client_handshake<S: Read + Write>(
    stream: &mut S,
    settings: &DefenseSettings,
    secret: &[u8; 32],
) -> Result<SessionKeys, HandshakeError> {
    let mut hello = [0u8; HELLO_LEN];
    hello[..4].copy_from_slice(&MAGIC);
    hello[4] = VERSION;
    hello[5] = settings.defense.wire_id();
    hello[6..38].copy_from_slice(&settings.param_hash());
    let client_nonce: [u8; 32] = rand::random();
    hello[38..70].copy_from_slice(&client_nonce);
    stream.write_all(&hello)?;

    let mut reply = [0u8; REPLY_LEN];
    stream.read_exact(&mut reply)?;
    if reply[0] != VERSION {
        return Err(HandshakeError::BadVersion);
    }
    let bridge_nonce: [u8; 32] = reply[1..33].try_into().expect("fixed slice");
    let expected = proof(secret, &hello, &bridge_nonce);
    // The bridge only proves itself if it saw matching parameters; a wrong
    // proof means a wrong secret or an impostor.
    if expected != reply[33..65] {
        return Err(HandshakeError::AuthFailure);
    }
    let (c2b, b2c) = derive_keys(secret, &client_nonce, &bridge_nonce);
    Ok(SessionKeys { tx: c2b, rx: b2c })
}

/// Runs the bridge side. Errors close the connection with nothing readable
/// on the wire: the caller just drops the stream.
pub fn bridge_handshake<S: Read + Write>(
    stream: &mut S,
    settings: &DefenseSettings,
    secret: &[u8; 32],
) -> Result<SessionKeys, HandshakeError> {
    let mut hello = [0u8; HELLO_LEN];
    stream.read_exact(&mut hello)?;
    if hello[..4] != MAGIC {
        return Err(HandshakeError::BadMagic);
    }
    if hello[4] != VERSION {
        return Err(HandshakeError::BadVersion);
    }
    if hello[5] != settings.defense.wire_id() || hello[6..38] != settings.param_hash() {
        return Err(HandshakeError::ParamMismatch);
    }
    let client_nonce: [u8; 32] = hello[38..70].try_into().expect("fixed slice");

    let bridge_nonce: [u8; 32] = rand::random();
    let mut reply = [0u8; REPLY_LEN];
    reply[0] = VERSION;
    reply[1..33].copy_from_slice(&bridge_nonce);
    reply[33..65].copy_from_slice(&proof(secret, &hello, &bridge_nonce));
    stream.write_all(&reply)?;

    let (c2b, b2c) = derive_keys(secret, &client_nonce, &bridge_nonce);
    Ok(SessionKeys { tx: b2c, rx: c2b })
}

/// SHA-256 of a canonical parameter encoding; both sides must agree on the
/// full block, not just the active defense.
pub fn hash_params(canonical: &[u8]) -> [u8; 32] {
    Sha256::digest(canonical).into()
}
