//! Binary model files.
//!
//! Layout: 8 magic bytes, u32 LE format version, u64 LE payload length,
//! 32-byte SHA-256 of the payload, then the bincode payload.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{KlrfError, Result};
use crate::learning::TrainedModel;

pub const MAGIC: &[u8; 8] = b"KLRFMODL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

pub fn encode_model(model: &TrainedModel) -> Result<Vec<u8>> {
    let payload = bincode::serialize(model).map_err(|e| KlrfError::Serialization(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(KlrfError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(KlrfError::Checksum(format!("file holds {} bytes, header alone needs {HEADER_LEN}", bytes.len())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4-byte slice"));
    if version != FORMAT_VERSION {
        return Err(KlrfError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8-byte slice"));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(KlrfError::Checksum(format!("payload holds {} bytes, header declares {len}", payload.len())));
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..HEADER_LEN] {
        return Err(KlrfError::Checksum("payload digest does not match".into()));
    }
    bincode::deserialize(payload).map_err(|e| KlrfError::Serialization(e.to_string()))
}

/// SHA-256 of the payload, hex encoded; equal digests mean equal models.
pub fn model_digest(model: &TrainedModel) -> Result<String> {
    let bytes = encode_model(model)?;
    Ok(bytes[20..HEADER_LEN].iter().map(|b| format!("{b:02x}")).collect())
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model)?).map_err(|e| KlrfError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    decode_model(&fs::read(path).map_err(|e| KlrfError::io(path, e))?)
}
