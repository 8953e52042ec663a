//! Versioned binary container for trained models.
//!
//! Layout (little endian): magic `SLMODEL\0`, `u16` version, `u8` family
//! tag, 64 ASCII bytes of manifest hash, `u32` subset length followed by
//! `u32` 0-based column indices, `u64` payload length, JSON payload.

use std::io::{Read, Write};

use super::TrainedModel;
use crate::error::{Error, Result};
use crate::features::manifest::manifest_hash;

const MAGIC: &[u8; 8] = b"SLMODEL\0";
pub const VERSION: u16 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFile(msg.into())
}

pub fn write_model<W: Write>(mut w: W, model: &TrainedModel) -> Result<()> {
    let payload = serde_json::to_vec(model)?;
    let mut buf = Vec::with_capacity(payload.len() + 128);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(model.spec.family().tag());
    buf.extend_from_slice(manifest_hash().as_bytes());
    buf.extend_from_slice(&(model.subset.len() as u32).to_le_bytes());
    for &c in &model.subset {
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    buf.extend_from_slice(&payload);
    w.write_all(&buf).map_err(|e| Error::io("<model>", e))
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(bad("truncated file"));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<model>", e))?;
    let mut c = Cursor(&bytes);
    if c.take(8)? != MAGIC {
        return Err(bad("not a model file"));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let tag = c.take(1)?[0];
    let hash = std::str::from_utf8(c.take(64)?).map_err(|_| bad("bad manifest hash"))?;
    if hash != manifest_hash() {
        return Err(bad("model was trained against a different feature manifest"));
    }
    let n = c.u32()? as usize;
    let subset = (0..n).map(|_| c.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let len = u64::from_le_bytes(c.take(8)?.try_into().unwrap()) as usize;
    let model: TrainedModel = serde_json::from_slice(c.take(len)?)?;
    if model.spec.family().tag() != tag {
        return Err(bad("family tag does not match payload"));
    }
    if model.subset != subset {
        return Err(bad("subset header does not match payload"));
    }
    Ok(model)
}
