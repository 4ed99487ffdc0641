//! Checkpoint files.
//!
//! ```text
//! "LSEGCKPT1"
//! u32 header length, header (UTF-8 `key = value` lines: model config + seed)
//! u32 tensor count
//! manifest: { u16 name length, name, u32 height, u32 width, u32 channels }*
//! data:     every tensor's values as f32, in manifest order
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::model::config::ModelConfig;
use crate::model::params::{ModelParameters, NamedTensor};
use crate::tensor_ops::{DenseMap, Dims, Real};

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"LSEGCKPT1";

pub fn encode_checkpoint<T: Real>(params: &ModelParameters<T>) -> Vec<u8> {
    let mut header = params.config().to_kv();
    header.insert("seed", params.seed());
    let header = header.to_text();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(params.tensors().len() as u32).to_le_bytes());
    for t in params.tensors() {
        let d = t.value.dims();
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        for v in [d.height, d.width, d.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for t in params.tensors() {
        for v in t.value.values() {
            let f = v.to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Truncated("checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParameters<f32>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            what: "checkpoint",
            expected: "LSEGCKPT1".into(),
        });
    }
    let header_len = c.u32()? as usize;
    let header = std::str::from_utf8(c.take(header_len)?)
        .map_err(|e| Error::Format(format!("checkpoint header is not UTF-8: {e}")))?;
    let kv = KeyValues::parse(header)?;
    let config = ModelConfig::from_kv(&kv, &["seed"])?;
    let seed: u64 = kv.required("seed")?;
    let count = c.u32()? as usize;
    let mut manifest = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|e| Error::Format(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let dims = Dims::new(c.u32()? as usize, c.u32()? as usize, c.u32()? as usize);
        manifest.push((name, dims));
    }
    let mut tensors = Vec::with_capacity(manifest.len());
    for (name, dims) in manifest {
        let raw = c.take(dims.len().checked_mul(4).ok_or(Error::Truncated("checkpoint"))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        tensors.push(NamedTensor {
            name,
            value: DenseMap::from_vec(dims, values)?,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes in checkpoint", bytes.len() - c.pos)));
    }
    ModelParameters::from_tensors(config, seed, tensors)
}

pub fn save_checkpoint<T: Real>(params: &ModelParameters<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParameters<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// SHA-256 of the checkpoint encoding.
pub fn checkpoint_digest<T: Real>(params: &ModelParameters<T>) -> String {
    crate::util::sha256_hex(&encode_checkpoint(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = ModelParameters::<f32>::init(ModelConfig::default(), 77).unwrap();
        let bytes = encode_checkpoint(&p);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = ModelParameters::<f32>::init(ModelConfig::default(), 1).unwrap();
        let bytes = encode_checkpoint(&p);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_checkpoint(&long), Err(Error::Format(_))));
    }
}
