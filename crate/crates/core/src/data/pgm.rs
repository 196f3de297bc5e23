//! Binary PGM (P5) codec, 8- and 16-bit.

use std::path::Path;

use ndarray::Array2;

use super::images::LabeledImage;
use crate::error::{D2nnError, Result};

/// Raw samples of a P5 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each ≤ `maxval`.
    pub samples: Vec<u16>,
}

impl Pgm {
    /// Samples divided by `maxval`.
    pub fn to_image(&self) -> Result<LabeledImage> {
        let m = self.maxval as f32;
        let a = Array2::from_shape_fn((self.height, self.width), |(y, x)| {
            self.samples[y * self.width + x] as f32 / m
        });
        LabeledImage::new(a, None)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.maxval == 0 || self.samples.len() != self.width * self.height {
            return Err(D2nnError::MalformedPgm(format!(
                "{} samples for {}x{} with maxval {}",
                self.samples.len(),
                self.width,
                self.height,
                self.maxval
            )));
        }
        if let Some(s) = self.samples.iter().find(|&&s| s > self.maxval) {
            return Err(D2nnError::MalformedPgm(format!("sample {s} exceeds maxval {}", self.maxval)));
        }
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.samples.iter().map(|&s| s as u8));
        } else {
            out.extend(self.samples.iter().flat_map(|s| s.to_be_bytes()));
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()?).map_err(|e| D2nnError::io(path, e))
    }
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(D2nnError::MalformedPgm("header ends early".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| D2nnError::MalformedPgm(format!("expected a number at byte {start}")))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    if !bytes.starts_with(b"P5") {
        return Err(D2nnError::MalformedPgm("missing P5 signature".into()));
    }
    let mut pos = 2;
    let width = header_token(bytes, &mut pos)?;
    let height = header_token(bytes, &mut pos)?;
    let maxval = header_token(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(D2nnError::MalformedPgm(format!("empty image {width}x{height}")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(D2nnError::MalformedPgm(format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(D2nnError::MalformedPgm("no whitespace after maxval".into()));
    }
    pos += 1;
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| D2nnError::MalformedPgm("image too large".into()))?;
    let data = &bytes[pos..];
    if data.len() < n * bps {
        return Err(D2nnError::MalformedPgm(format!(
            "{} sample bytes, expected {}",
            data.len(),
            n * bps
        )));
    }
    let samples: Vec<u16> = if bps == 1 {
        data[..n].iter().map(|&b| b as u16).collect()
    } else {
        data[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some(s) = samples.iter().find(|&&s| s as usize > maxval) {
        return Err(D2nnError::MalformedPgm(format!("sample {s} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Pgm> {
    let path = path.as_ref();
    parse_pgm(&std::fs::read(path).map_err(|e| D2nnError::io(path, e))?)
}
