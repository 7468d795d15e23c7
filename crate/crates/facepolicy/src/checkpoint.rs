//! Policy checkpoints.
//!
//! Layout: "FCKP", u32 version, u32 config length, config JSON, u32 block
//! count, then per block u32 name length, name bytes, u64 element count and
//! f32 values. Blocks follow `Policy::tensors` order.

use std::path::Path;

use facepolicy_core::training::TrainConfig;
use facepolicy_core::{Policy, PolicyConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, Error, Result};
use crate::format::{put_f32s, Cursor};

pub const MAGIC: &[u8; 4] = b"FCKP";
pub const VERSION: u32 = 1;
const K: &str = "FCKP";

/// Configuration echoed into every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub policy: PolicyConfig,
    pub train: TrainConfig,
}

pub fn encode_checkpoint(policy: &Policy, train: &TrainConfig) -> Result<Vec<u8>> {
    let config = CheckpointConfig {
        policy: policy.config.clone(),
        train: *train,
    };
    let json = serde_json::to_vec(&config).map_err(|e| Error::format(K, e.to_string()))?;
    let tensors = policy.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.value.len() as u64).to_le_bytes());
        put_f32s(&mut out, t.value.iter().copied());
    }
    Ok(out)
}

/// Rebuilds the policy; every block must match the configured name and size.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Policy, TrainConfig)> {
    let mut c = Cursor::new(K, bytes);
    c.magic(MAGIC)?;
    c.version(VERSION)?;
    let len = c.u32("config length")? as usize;
    let config: CheckpointConfig =
        serde_json::from_slice(c.take(len, "config")?).map_err(|e| Error::format(K, format!("config: {e}")))?;
    let mut policy = Policy::zeros(config.policy)?;
    let blocks = c.u32("block count")? as usize;
    let expected = policy.tensors().len();
    if blocks != expected {
        return Err(Error::format(
            K,
            format!("{blocks} parameter blocks, config needs {expected}"),
        ));
    }
    for t in policy.tensors_mut() {
        let name_len = c.u32("block name length")? as usize;
        let name = c.take(name_len, "block name")?;
        if name != t.name.as_bytes() {
            return Err(Error::format(
                K,
                format!("expected block '{}', found '{}'", t.name, String::from_utf8_lossy(name)),
            ));
        }
        let count = c.u64("block size")?;
        if count != t.value.len() as u64 {
            return Err(Error::format(
                K,
                format!("block '{}' has {count} values, config needs {}", t.name, t.value.len()),
            ));
        }
        let values = c.f32s(t.value.len(), "block data")?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(K, format!("block '{}' value {i} is not finite", t.name)));
        }
        for (dst, v) in t.value.iter_mut().zip(values) {
            *dst = v as f64;
        }
    }
    c.finish()?;
    Ok((policy, config.train))
}

pub fn save_checkpoint(path: &Path, policy: &Policy, train: &TrainConfig) -> Result<()> {
    write_file(path, &encode_checkpoint(policy, train).map_err(|e| e.in_file(path))?)
}

pub fn load_checkpoint(path: &Path) -> Result<(Policy, TrainConfig)> {
    decode_checkpoint(&read_file(path)?).map_err(|e| e.in_file(path))
}
