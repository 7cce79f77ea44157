//! Named-tensor archive.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "BRAUCKPT"
//! version    u32      1
//! count      u64      number of entries
//! entry*:
//!   name_len u32      byte length of the UTF-8 name
//!   name     [u8]
//!   dtype    u8       0 = f32, 1 = f64
//!   rank     u32
//!   extents  u64 × rank
//!   values   element × product(extents), little-endian IEEE-754
//! ```
//!
//! Entries are written in the order given, so equal inputs give equal bytes.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::real::{DType, Real};
use crate::tensor::{numel, Tensor};

pub const MAGIC: &[u8; 8] = b"BRAUCKPT";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

pub fn encode<T: Real>(entries: &[(&str, &Tensor<T>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE.tag());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.put_le(&mut out);
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
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated archive"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses an archive whose entries all have element type `T`.
pub fn decode<T: Real>(bytes: &[u8]) -> Result<Vec<(String, Tensor<T>)>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = cur.u64()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| bad("entry name is not UTF-8"))?
            .to_string();
        let tag = cur.take(1)?[0];
        let dtype = DType::from_tag(tag).ok_or_else(|| bad(format!("unknown dtype tag {tag}")))?;
        if dtype != T::DTYPE {
            return Err(bad(format!("entry {name} is {dtype:?}, expected {:?}", T::DTYPE)));
        }
        let rank = cur.u32()? as usize;
        let shape = (0..rank)
            .map(|_| cur.u64().map(|e| e as usize))
            .collect::<Result<Vec<_>>>()?;
        let width = dtype.size_in_bytes();
        let raw = cur.take(numel(&shape) * width)?;
        let data = raw.chunks_exact(width).map(T::get_le).collect();
        let t = Tensor::new(shape, data).map_err(|e| bad(format!("entry {name}: {e}")))?;
        entries.push((name, t));
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes after last entry"));
    }
    Ok(entries)
}

pub fn write_to<T: Real>(mut w: impl Write, entries: &[(&str, &Tensor<T>)]) -> Result<()> {
    w.write_all(&encode(entries))?;
    Ok(())
}

pub fn read_from<T: Real>(mut r: impl Read) -> Result<Vec<(String, Tensor<T>)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save<T: Real>(path: impl AsRef<Path>, entries: &[(&str, &Tensor<T>)]) -> Result<()> {
    std::fs::write(path, encode(entries))?;
    Ok(())
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor<T>)>> {
    decode(&std::fs::read(path)?)
}
