//! Binary checkpoints: magic, `u32` header length, JSON header, raw `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Layout, PolicyParams, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TOLLPPO1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layout: Layout,
    pub tensors: Vec<Tensor>,
    /// Hash of the training configuration that produced the weights.
    pub config_hash: String,
    pub seed: u64,
    pub iterations: usize,
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &PolicyParams, header: &CheckpointHeader) -> Result<()> {
    if header.layout != params.layout {
        return Err(Error::Checkpoint("header layout does not match parameters".into()));
    }
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(&json)?;
    for v in &params.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(PolicyParams, CheckpointHeader)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    if header.tensors != header.layout.tensors() {
        return Err(Error::Checkpoint("tensor table does not match layout".into()));
    }
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let count = header.layout.param_count();
    if data.len() != count * 8 {
        return Err(Error::Checkpoint(format!("expected {} bytes of weights, found {}", count * 8, data.len())));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((PolicyParams::from_values(header.layout, values)?, header))
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, header: &CheckpointHeader) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_checkpoint(&mut out, params, header)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, CheckpointHeader)> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
