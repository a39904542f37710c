//! Model checkpoint: one binary file holding the magic bytes, the network
//! configuration, then every state tensor (parameters and batch-norm running
//! statistics) in declaration order as little-endian 32-bit floats.
//!
//! Layout:
//! ```text
//! "SUNET1"                             6 bytes
//! input_size  : u32 LE
//! base_filters: u32 LE
//! depth       : u32 LE
//! dropout_rate: f64 LE
//! seed        : u64 LE
//! state       : f32 LE × param/stat count (declaration order)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{build_sat_unet, SatUnet, UnetConfig};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"SUNET1";

pub fn save_checkpoint(net: &SatUnet, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(net.config.input_size as u32).to_le_bytes());
    buf.extend_from_slice(&(net.config.base_filters as u32).to_le_bytes());
    buf.extend_from_slice(&(net.config.depth as u32).to_le_bytes());
    buf.extend_from_slice(&net.config.dropout_rate.to_le_bytes());
    buf.extend_from_slice(&net.config.seed.to_le_bytes());
    net.for_each_state(&mut |slice| {
        for &v in slice {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<SatUnet> {
    let mut file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(path.display().to_string(), e))?;

    let bad = |reason: &str| Error::BadCheckpoint(format!("{}: {reason}", path.display()));
    const HEADER: usize = 6 + 4 + 4 + 4 + 8 + 8;
    if buf.len() < HEADER {
        return Err(bad("truncated header"));
    }
    if &buf[..6] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(buf[off..off + 4].try_into().expect("4 bytes"));
    let config = UnetConfig {
        input_size: u32_at(6) as usize,
        base_filters: u32_at(10) as usize,
        depth: u32_at(14) as usize,
        dropout_rate: f64::from_le_bytes(buf[18..26].try_into().expect("8 bytes")),
        seed: u64::from_le_bytes(buf[26..34].try_into().expect("8 bytes")),
    };

    let mut net = build_sat_unet(&config)?;
    let mut expected = 0usize;
    net.for_each_state(&mut |s| expected += s.len());
    let payload = &buf[HEADER..];
    if payload.len() != expected * 4 {
        return Err(bad(&format!(
            "state payload is {} bytes, expected {} ({} floats)",
            payload.len(),
            expected * 4,
            expected
        )));
    }
    let mut off = 0usize;
    net.for_each_state_mut(&mut |slice| {
        for v in slice.iter_mut() {
            *v = f32::from_le_bytes(payload[off..off + 4].try_into().expect("4 bytes")) as f64;
            off += 4;
        }
    });
    Ok(net)
}
