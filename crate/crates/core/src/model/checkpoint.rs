//! Binary named-tensor checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "SLATCKPT"
//! version    u32
//! header_len u32, header: UTF-8 JSON {"config": .., "dims": ..}
//! count      u32
//! count × { name_len u32, name bytes, rank u32, dims u64 × rank, payload f64 × numel }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InputDims, SlatConfig, SlatModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SLATCKPT";

#[derive(Serialize, Deserialize)]
struct Header {
    config: SlatConfig,
    dims: InputDims,
}

pub fn write_checkpoint<W: Write>(model: &SlatModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&Header {
        config: model.config().clone(),
        dims: model.dims(),
    })?;
    write_u32(&mut w, header.len())?;
    w.write_all(&header)?;
    let params = model.params();
    write_u32(&mut w, params.len())?;
    for (name, t) in params.iter() {
        write_u32(&mut w, name.len())?;
        w.write_all(name.as_bytes())?;
        write_u32(&mut w, t.shape().len())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<SlatModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let hlen = read_u32(&mut r)? as usize;
    let mut header = vec![0u8; hlen];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let mut model = SlatModel::layout(header.config, header.dims)?;

    let count = read_u32(&mut r)? as usize;
    if count != model.params().len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} tensors, model expects {}",
            model.params().len()
        )));
    }
    for (name, t) in model.params_mut().iter_mut() {
        let nlen = read_u32(&mut r)? as usize;
        let mut nbuf = vec![0u8; nlen];
        r.read_exact(&mut nbuf)?;
        let stored = String::from_utf8(nbuf)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if stored != name {
            return Err(Error::Format(format!(
                "expected tensor {name}, found {stored}"
            )));
        }
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        if shape != t.shape() {
            return Err(Error::Format(format!(
                "tensor {name}: stored shape {shape:?}, expected {:?}",
                t.shape()
            )));
        }
        for v in t.data_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &SlatModel, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SlatModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
