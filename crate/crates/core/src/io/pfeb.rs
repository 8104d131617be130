//! PFEB channel files: `PFEB`, then u32 LE width, height and channel count,
//! then the f64 LE values one channel after another.

use std::fs;
use std::path::Path;

use crate::error::{PfeError, Result};
use crate::sparsela::DenseMatrix;

const MAGIC: &[u8; 4] = b"PFEB";

/// Embedding channels of a `width × height` image, one column per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Channels {
    pub width: usize,
    pub height: usize,
    pub y: DenseMatrix,
}

pub fn encode_pfeb(width: usize, height: usize, y: &DenseMatrix) -> Result<Vec<u8>> {
    if y.n_rows() != width * height {
        return Err(PfeError::Shape(format!(
            "{} rows for a {width}x{height} image",
            y.n_rows()
        )));
    }
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| PfeError::Shape(format!("{v} does not fit in 32 bits")))
    };
    let mut out = Vec::with_capacity(16 + 8 * y.as_slice().len());
    out.extend_from_slice(MAGIC);
    for v in [width, height, y.n_cols()] {
        out.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    for v in y.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_pfeb(bytes: &[u8]) -> std::result::Result<Channels, String> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err("not a PFEB file".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (width, height, d) = (word(0), word(1), word(2));
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(d))
        .ok_or("dimensions overflow")?;
    let body = &bytes[16..];
    if body.len() != 8 * count {
        return Err(format!("expected {} value bytes, found {}", 8 * count, body.len()));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let y = DenseMatrix::from_col_major(width * height, d, values).map_err(|e| e.to_string())?;
    Ok(Channels { width, height, y })
}

pub fn write_pfeb(path: impl AsRef<Path>, width: usize, height: usize, y: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfeb(width, height, y)?).map_err(|e| PfeError::io(path, e))
}

pub fn read_pfeb(path: impl AsRef<Path>) -> Result<Channels> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PfeError::io(path, e))?;
    decode_pfeb(&bytes).map_err(|m| PfeError::format(path, m))
}
