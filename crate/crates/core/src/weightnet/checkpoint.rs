//! FWN1 network checkpoints.
//!
//! ```text
//! "FWN1" | version: u16 = 1 | layers: u16
//! per layer: rows: u32 | cols: u32 | weights: rows*cols f32 (row-major) | bias: rows f32
//! ```
//!
//! Everything is little-endian. Parameters are stored as binary32, so a
//! saved network reloads with each parameter rounded to the nearest f32.

use std::fs;
use std::path::Path;

use super::{DenseLayer, DenseNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FWN1";
pub const VERSION: u16 = 1;

pub fn encode_net(net: &DenseNet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers.len() as u16).to_le_bytes());
    for l in &net.layers {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.bytes.len() as u64, format!("truncated {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.pos as u64, format!("{what} size overflows")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

pub fn decode_net(bytes: &[u8]) -> Result<DenseNet> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic"));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let count = cur.u16("layer count")? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let at = cur.pos as u64;
        let rows = cur.u32("rows")? as usize;
        let cols = cur.u32("cols")? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format(at, format!("layer {rows}x{cols} overflows")))?;
        let weights = cur.f32s(n, "weights")?;
        let bias = cur.f32s(rows, "bias")?;
        layers.push(DenseLayer {
            rows,
            cols,
            weights,
            bias,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(cur.pos as u64, "trailing bytes after last layer"));
    }
    DenseNet::from_layers(layers)
}

pub fn save_net(path: impl AsRef<Path>, net: &DenseNet) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, encode_net(net))?;
    Ok(())
}

pub fn load_net(path: impl AsRef<Path>) -> Result<DenseNet> {
    decode_net(&fs::read(path)?)
}
