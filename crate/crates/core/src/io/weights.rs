//! `GRMH` weight container: magic, version, tensor count, then per tensor
//! name length, UTF-8 name, dtype tag, rank, dims and a row-major payload.
//! All integers are little-endian `u32`.

use std::path::Path;

use super::binary::{dim, put_f32s, put_u32, Reader};
use super::{read_file, write_file, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::params::{NetParams, Tensor};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"GRMH";
pub const DTYPE_F32: u32 = 0;

pub fn encode_weights(params: &NetParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, dim(params.len(), "tensor count")?);
    for (name, t) in params.iter() {
        put_u32(&mut out, dim(name.len(), "name length")?);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, DTYPE_F32);
        put_u32(&mut out, dim(t.shape.len(), "rank")?);
        for &d in &t.shape {
            put_u32(&mut out, dim(d, "dimension")?);
        }
        put_f32s(&mut out, &t.data);
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<NetParams> {
    let mut r = Reader::new(bytes, "weight file");
    r.magic(WEIGHTS_MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut params = NetParams::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::ModelFormat(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let dtype = r.u32()?;
        if dtype != DTYPE_F32 {
            return Err(Error::UnknownDtype(dtype));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::ModelFormat(format!("tensor `{name}` is too large")))?;
        let data = r.f32s(n)?;
        if params.contains(&name) {
            return Err(Error::DuplicateName(name));
        }
        params.insert(name, Tensor { shape, data });
    }
    r.finish()?;
    Ok(params)
}

pub fn save_weights(params: &NetParams, path: &Path) -> Result<()> {
    write_file(path, &encode_weights(params)?)
}

pub fn load_weights(path: &Path) -> Result<NetParams> {
    decode_weights(&read_file(path)?)
}
