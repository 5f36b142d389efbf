//! Self-describing checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SMRY"            4-byte magic
//! version           u32     (currently 1)
//! descriptor_len    u64
//! descriptor        JSON: architecture, condition standardization, free-form
//!                   metadata (schedules, data scaling, training provenance)
//! value_count       u64     total number of f64 parameters
//! values            value_count × f64, tensors in the net's fixed order,
//!                   each row-major
//! crc32             u32     CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Loading validates the magic, version, checksum, and that the value count
//! matches what the architecture implies, so silent corruption or an
//! architecture mismatch cannot produce a plausible-looking net.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetConfig, ScoreNet};
use crate::numerics::{RealVec, RngStream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SMRY";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Descriptor {
    config: NetConfig,
    cond_shift: Vec<f64>,
    cond_scale: Vec<f64>,
    meta: serde_json::Value,
}

/// Write `net` (and arbitrary JSON metadata) to `path`.
pub fn save_checkpoint(path: &Path, net: &ScoreNet, meta: &serde_json::Value) -> Result<()> {
    let (shift, scale) = net.cond_standardization();
    let desc = Descriptor {
        config: net.config().clone(),
        cond_shift: shift.to_vec(),
        cond_scale: scale.to_vec(),
        meta: meta.clone(),
    };
    let desc_bytes = serde_json::to_vec(&desc)
        .map_err(|e| Error::Checkpoint(format!("descriptor serialization failed: {e}")))?;

    let tensors = net.param_tensors();
    let value_count: usize = tensors.iter().map(|t| t.len()).sum();
    let mut buf =
        Vec::with_capacity(4 + 4 + 8 + desc_bytes.len() + 8 + value_count * 8 + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(desc_bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&desc_bytes);
    buf.extend_from_slice(&(value_count as u64).to_le_bytes());
    for t in tensors {
        for &v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, buf)?;
    Ok(())
}

/// Advance `pos` by `n` bytes within `buf`, never touching the trailing
/// 4-byte checksum.
fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize, path: &Path) -> Result<&'a [u8]> {
    let limit = buf.len().saturating_sub(4);
    if n > limit || *pos > limit - n {
        return Err(Error::Checkpoint(format!(
            "{} is truncated ({} bytes)",
            path.display(),
            buf.len()
        )));
    }
    let s = &buf[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

/// Read a checkpoint; returns the net and the stored metadata.
pub fn load_checkpoint(path: &Path) -> Result<(ScoreNet, serde_json::Value)> {
    let buf = std::fs::read(path).map_err(|e| {
        Error::Checkpoint(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut pos = 0usize;

    if buf.len() < 4 + 4 + 8 + 8 + 4 {
        return Err(Error::Checkpoint(format!(
            "{} is too short to be a checkpoint ({} bytes)",
            path.display(),
            buf.len()
        )));
    }
    let stored_crc = u32::from_le_bytes(buf[buf.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&buf[..buf.len() - 4]);
    if stored_crc != computed {
        return Err(Error::Checkpoint(format!(
            "{} failed its checksum (stored {stored_crc:#010x}, computed {computed:#010x})",
            path.display()
        )));
    }

    if take(&buf, &mut pos, 4, path)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} does not start with the checkpoint magic",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(take(&buf, &mut pos, 4, path)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported checkpoint version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let desc_len =
        u64::from_le_bytes(take(&buf, &mut pos, 8, path)?.try_into().expect("8 bytes")) as usize;
    let desc: Descriptor = serde_json::from_slice(take(&buf, &mut pos, desc_len, path)?)
        .map_err(|e| Error::Checkpoint(format!("{}: bad descriptor: {e}", path.display())))?;
    let value_count =
        u64::from_le_bytes(take(&buf, &mut pos, 8, path)?.try_into().expect("8 bytes")) as usize;

    let mut net = ScoreNet::new(desc.config, RngStream::new(0))
        .map_err(|e| Error::Checkpoint(format!("{}: bad architecture: {e}", path.display())))?;
    if net.param_count() != value_count {
        return Err(Error::Checkpoint(format!(
            "{}: {} stored values but the architecture implies {}",
            path.display(),
            value_count,
            net.param_count()
        )));
    }
    let values = take(&buf, &mut pos, value_count * 8, path)?;
    let mut k = 0usize;
    for t in net.param_tensors_mut() {
        for v in t.iter_mut() {
            *v = f64::from_le_bytes(values[k..k + 8].try_into().expect("8 bytes"));
            k += 8;
        }
    }
    if !desc.cond_shift.is_empty() {
        net.set_cond_standardization(
            RealVec::from_vec(desc.cond_shift),
            RealVec::from_vec(desc.cond_scale),
        )
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    }
    Ok((net, desc.meta))
}

/// Like [`load_checkpoint`], but fail unless the stored architecture equals
/// `expected`.
pub fn load_checkpoint_expecting(
    path: &Path,
    expected: &NetConfig,
) -> Result<(ScoreNet, serde_json::Value)> {
    let (net, meta) = load_checkpoint(path)?;
    if net.config() != expected {
        return Err(Error::Checkpoint(format!(
            "{}: stored architecture differs from the expected one",
            path.display()
        )));
    }
    Ok((net, meta))
}
