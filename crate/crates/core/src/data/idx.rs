use std::path::Path;

use ndarray::Array2;

use super::images::LabeledImage;
use crate::error::{D2nnError, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(D2nnError::Truncated {
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let actual = self.u32()?;
        if actual != expected {
            return Err(D2nnError::WrongMagic { expected, actual });
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(D2nnError::TrailingBytes(n)),
        }
    }
}

fn dim(v: u32) -> Result<usize> {
    usize::try_from(v).map_err(|_| D2nnError::DimensionOverflow(format!("{v} does not fit in usize")))
}

/// Parses an IDX3 image file (big-endian header, one unsigned byte per pixel).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<LabeledImage>> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_IMAGE_MAGIC)?;
    let count = dim(r.u32()?)?;
    let rows = dim(r.u32()?)?;
    let cols = dim(r.u32()?)?;
    if count > 0 && (rows == 0 || cols == 0) {
        return Err(D2nnError::DimensionOverflow(format!("image size {rows}x{cols}")));
    }
    let per_image = rows
        .checked_mul(cols)
        .ok_or_else(|| D2nnError::DimensionOverflow(format!("{rows}x{cols} pixels")))?;
    let total = per_image
        .checked_mul(count)
        .ok_or_else(|| D2nnError::DimensionOverflow(format!("{count} images of {per_image} pixels")))?;
    let payload = r.take(total)?;
    r.finish()?;
    payload
        .chunks_exact(per_image.max(1))
        .take(count)
        .map(|px| {
            let a = Array2::from_shape_fn((rows, cols), |(y, x)| px[y * cols + x] as f32 / 255.0);
            LabeledImage::new(a, None)
        })
        .collect()
}

/// Parses an IDX1 label file; every label must be a digit.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_LABEL_MAGIC)?;
    let count = dim(r.u32()?)?;
    let labels = r.take(count)?;
    r.finish()?;
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(D2nnError::LabelOutOfRange(bad));
    }
    Ok(labels.to_vec())
}

#[derive(Debug, Clone)]
pub struct MnistData {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| D2nnError::io(path, e))
}

fn labeled(images: Vec<LabeledImage>, labels: Vec<u8>) -> Result<Vec<LabeledImage>> {
    if images.len() != labels.len() {
        return Err(D2nnError::InvalidArgument(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(img, l)| img.with_label(Some(l as usize)))
        .collect())
}

/// Loads the four standard uncompressed MNIST files from `dir`.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<MnistData> {
    let dir = dir.as_ref();
    let images = |name: &str| parse_idx_images(&read(&dir.join(name))?);
    let labels = |name: &str| parse_idx_labels(&read(&dir.join(name))?);
    Ok(MnistData {
        train: labeled(images("train-images-idx3-ubyte")?, labels("train-labels-idx1-ubyte")?)?,
        test: labeled(images("t10k-images-idx3-ubyte")?, labels("t10k-labels-idx1-ubyte")?)?,
    })
}
