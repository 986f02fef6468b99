//! Named-parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! u32 count
//! count × { u32 name_len, name bytes (UTF-8), u32 rank, rank × u64 dim, numel × f64 }
//! ```

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub fn encode<'a>(entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let entries: Vec<_> = entries.into_iter().collect();
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(entries.len() as u32).unwrap();
    for (name, t) in entries {
        out.write_u32::<LittleEndian>(name.len() as u32).unwrap();
        out.extend_from_slice(name.as_bytes());
        out.write_u32::<LittleEndian>(t.rank() as u32).unwrap();
        for &d in t.shape() {
            out.write_u64::<LittleEndian>(d as u64).unwrap();
        }
        for &v in t.data() {
            out.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let bad = |what: &str| Error::Checkpoint(format!("truncated or corrupt checkpoint ({what})"));
    let mut r = Cursor::new(bytes);
    let count = r.read_u32::<LittleEndian>().map_err(|_| bad("count"))?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r
            .read_u32::<LittleEndian>()
            .map_err(|_| bad("name length"))? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| bad("name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("name encoding"))?;
        let rank = r.read_u32::<LittleEndian>().map_err(|_| bad("rank"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.read_u64::<LittleEndian>().map_err(|_| bad("dims"))? as usize);
        }
        let numel: usize = shape.iter().product();
        if numel > bytes.len() / 8 {
            return Err(bad("payload size"));
        }
        let mut data = vec![0.0; numel];
        r.read_f64_into::<LittleEndian>(&mut data)
            .map_err(|_| bad("payload"))?;
        entries.push((name, Tensor::new(shape, data)?));
    }
    if (r.position() as usize) != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(entries)
}

impl ParamStore {
    pub fn to_checkpoint(&self) -> Vec<u8> {
        encode(self.named_values())
    }

    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<()> {
        self.load_named(decode(bytes)?)
    }
}
