//! NSBW checkpoint container.
//!
//! Layout (little-endian): magic `NSBW`, u16 version, then entries until end
//! of input, each `u16 name length, name bytes, u8 rank, u32 extents[rank],
//! f32 values[product(extents)]`.

use super::tensor::{numel, Tensor};
use crate::container::{check_finite, to_u32, to_u8, Reader, Writer};
use crate::error::FormatError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NSBW";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn save_checkpoint(entries: &[(String, Tensor)]) -> Result<Vec<u8>, FormatError> {
    let mut w = Writer::with_header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    for (name, t) in entries {
        let len = u16::try_from(name.len())
            .map_err(|_| FormatError::Malformed(format!("tensor name {name:?} too long")))?;
        w.u16(len);
        w.bytes(name.as_bytes());
        w.u8(to_u8(t.shape().len(), "rank")?);
        for &e in t.shape() {
            w.u32(to_u32(e, "extent")?);
        }
        w.f32s(t.data());
    }
    Ok(w.finish())
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, FormatError> {
    let mut r = Reader::header(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let mut out = Vec::new();
    while !r.at_end() {
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| FormatError::Malformed("tensor name is not UTF-8".into()))?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape.contains(&0) {
            return Err(FormatError::Malformed(format!("tensor {name:?} has a zero extent")));
        }
        let values = r.f32s(numel(&shape))?;
        check_finite(&values, &name)?;
        let t = Tensor::new(shape, values).map_err(|e| FormatError::Malformed(e.to_string()))?;
        out.push((name, t));
    }
    Ok(out)
}
