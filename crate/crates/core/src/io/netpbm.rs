//! Binary PGM (P5) and PPM (P6), 8 and 16 bit.

use std::fs;
use std::path::Path;

use crate::error::{PfeError, Result};
use crate::graph::{Image, LabelMap};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netpbm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub maxval: u16,
    /// Row-major, channel-interleaved.
    pub samples: Vec<u16>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> std::result::Result<usize, String> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("expected a number at byte {start}"))
    }
}

pub fn decode_netpbm(bytes: &[u8]) -> std::result::Result<Netpbm, String> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err("not a binary PGM/PPM file".into()),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after header".into());
    }
    let data = &bytes[h.pos + 1..];
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or("image too large")?;
    let wide = maxval > 255;
    let need = if wide { 2 * count } else { count };
    if data.len() < need {
        return Err(format!("expected {need} bytes of pixel data, found {}", data.len()));
    }
    let samples: Vec<u16> = if wide {
        data[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data[..need].iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(s) = samples.iter().find(|&&s| usize::from(s) > maxval) {
        return Err(format!("sample {s} exceeds maxval {maxval}"));
    }
    Ok(Netpbm {
        width,
        height,
        channels,
        maxval: maxval as u16,
        samples,
    })
}

fn load(path: &Path) -> Result<Netpbm> {
    let bytes = fs::read(path).map_err(|e| PfeError::io(path, e))?;
    decode_netpbm(&bytes).map_err(|m| PfeError::format(path, m))
}

/// Image with samples scaled to `[0, 1]` by maxval.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let pnm = load(path.as_ref())?;
    let scale = f64::from(pnm.maxval);
    let data = pnm.samples.iter().map(|&s| f64::from(s) / scale).collect();
    Image::new(pnm.width, pnm.height, pnm.channels, data)
}

/// Label map from a PGM; labels are the gray values.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let pnm = load(path)?;
    if pnm.channels != 1 {
        return Err(PfeError::format(path, "label maps must be grayscale PGM"));
    }
    LabelMap::new(pnm.width, pnm.height, pnm.samples.iter().map(|&s| u32::from(s)).collect())
}

fn header(magic: &str, width: usize, height: usize, maxval: u16) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n{maxval}\n").into_bytes()
}

pub fn encode_pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = header("P5", width, height, 255);
    out.extend_from_slice(pixels);
    out
}

pub fn encode_ppm8(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = header("P6", width, height, 255);
    out.extend_from_slice(rgb);
    out
}

pub fn encode_pgm16(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    let mut out = header("P5", width, height, 65535);
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| PfeError::io(path, e))
}

pub fn write_pgm8(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    write(path.as_ref(), &encode_pgm8(width, height, pixels))
}

/// 8-bit PGM or PPM depending on the channel count.
pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    let encoded = match img.channels() {
        1 => encode_pgm8(img.width(), img.height(), &bytes),
        _ => encode_ppm8(img.width(), img.height(), &bytes),
    };
    write(path.as_ref(), &encoded)
}

/// 16-bit PGM, label = gray value.
pub fn write_label_map(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    let pixels = map
        .labels
        .iter()
        .map(|&l| u16::try_from(l).map_err(|_| PfeError::format(path, format!("label {l} exceeds 16 bits"))))
        .collect::<Result<Vec<_>>>()?;
    write(path, &encode_pgm16(map.width, map.height, &pixels))
}
