//! Checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes      | content                                        |
//! |------------|------------------------------------------------|
//! | 8          | magic `INSPOLCY`                               |
//! | 4          | format version (`u32`, currently 1)            |
//! | 4          | header length `n` (`u32`)                      |
//! | n          | UTF-8 JSON header: `{"arch": …, "meta": …}`    |
//! | 8          | parameter count `p` (`u64`)                    |
//! | 8·p        | parameters as `f64`                            |
//! | 32         | SHA-256 of every preceding byte                |

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::nn::PolicyArch;
use super::{Policy, PolicyError};

pub const MAGIC: &[u8; 8] = b"INSPOLCY";
pub const VERSION: u32 = 1;

/// Provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub variant: String,
    pub seed: u64,
    pub env_steps: u64,
    pub noise: f64,
    pub beta: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: PolicyArch,
    meta: CheckpointMeta,
}

pub fn encode_checkpoint(policy: &Policy, meta: &CheckpointMeta) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        arch: policy.layout.arch.clone(),
        meta: meta.clone(),
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(56 + header.len() + 8 * policy.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(policy.params.len() as u64).to_le_bytes());
    for p in &policy.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Policy, CheckpointMeta), PolicyError> {
    let corrupt = |m: &str| PolicyError::CorruptCheckpoint(m.to_string());
    if bytes.len() < 8 + 4 + 4 + 8 + 32 {
        return Err(corrupt("file too short"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(PolicyError::ChecksumMismatch);
    }
    if &body[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let hlen = u32_at(12) as usize;
    let hend = 16 + hlen;
    if body.len() < hend + 8 {
        return Err(corrupt("truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&body[16..hend]).map_err(|e| corrupt(&format!("header: {e}")))?;
    let count = u64::from_le_bytes(body[hend..hend + 8].try_into().unwrap()) as usize;
    let data = &body[hend + 8..];
    if data.len() != 8 * count {
        return Err(corrupt("parameter block length mismatch"));
    }
    let params: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let policy = Policy::from_params(header.arch, params)?;
    Ok((policy, header.meta))
}

pub fn save_checkpoint(path: &std::path::Path, policy: &Policy, meta: &CheckpointMeta) -> Result<(), PolicyError> {
    std::fs::write(path, encode_checkpoint(policy, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<(Policy, CheckpointMeta), PolicyError> {
    decode_checkpoint(&std::fs::read(path)?)
}
