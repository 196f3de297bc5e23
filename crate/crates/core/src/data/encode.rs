use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::images::LabeledImage;
use crate::error::{D2nnError, Result};
use crate::optics::{ComplexField, GridSpec};
use crate::training::{Sample, SampleSource};

/// How images become input fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Encoding {
    /// Side length of the centered square object region, in meters.
    pub object_extent: f64,
    /// Threshold resampled amplitudes at 0.5.
    #[serde(default)]
    pub binarize: bool,
}

/// Bilinear sample of `img` at fractional pixel coordinates, clamped at the border.
fn bilinear(img: &Array2<f32>, u: f64, v: f64) -> f64 {
    let (h, w) = img.dim();
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let p = |y: usize, x: usize| img[[y, x]] as f64;
    let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
    let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Source coordinate of target pixel `j` when `src` pixels span `dst` pixels, aligning pixel centers.
fn source_coord(j: usize, src: usize, dst: usize) -> f64 {
    ((j as f64 + 0.5) * src as f64) / dst as f64 - 0.5
}

pub fn encode_with(image: &LabeledImage, grid: GridSpec, encoding: &Encoding) -> Result<ComplexField> {
    let extent = encoding.object_extent;
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!("object extent must be positive, got {extent}")));
    }
    let plane = grid.nx.min(grid.ny) as f64 * grid.pitch;
    let m = (extent / grid.pitch).round() as usize;
    if extent > plane * (1.0 + 1e-9) || m > grid.nx.min(grid.ny) {
        return Err(D2nnError::InvalidArgument(format!(
            "object extent {extent} m ({m} pixels) exceeds the {}x{} plane",
            grid.nx, grid.ny
        )));
    }
    if m == 0 {
        return Err(D2nnError::InvalidArgument(format!(
            "object extent {extent} m is below one pixel pitch"
        )));
    }
    let (h, w) = image.pixels().dim();
    let x0 = (grid.nx - m) / 2;
    let y0 = (grid.ny - m) / 2;
    let mut values = Array2::zeros(grid.shape());
    for j in 0..m {
        let v = source_coord(j, h, m);
        for i in 0..m {
            let mut a = bilinear(image.pixels(), source_coord(i, w, m), v);
            if encoding.binarize {
                a = if a >= 0.5 { 1.0 } else { 0.0 };
            }
            values[[y0 + j, x0 + i]] = Complex64::new(a, 0.0);
        }
    }
    ComplexField::from_values(grid, values)
}

/// Amplitude encoding under plane-wave illumination: the image is resampled
/// onto the centered `object_extent` square, zero elsewhere, phase zero.
pub fn encode_amplitude(image: &LabeledImage, grid: GridSpec, object_extent: f64) -> Result<ComplexField> {
    encode_with(
        image,
        grid,
        &Encoding {
            object_extent,
            binarize: false,
        },
    )
}

/// Images encoded on demand, so large datasets need not be held as fields.
#[derive(Debug, Clone)]
pub struct EncodedImages {
    images: Vec<LabeledImage>,
    grid: GridSpec,
    encoding: Encoding,
}

impl EncodedImages {
    pub fn new(images: Vec<LabeledImage>, grid: GridSpec, encoding: Encoding) -> Result<Self> {
        grid.validate()?;
        if let Some(first) = images.first() {
            encode_with(first, grid, &encoding)?;
        }
        Ok(EncodedImages {
            images,
            grid,
            encoding,
        })
    }

    pub fn images(&self) -> &[LabeledImage] {
        &self.images
    }
}

impl SampleSource for EncodedImages {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        let img = self
            .images
            .get(index)
            .ok_or_else(|| D2nnError::InvalidArgument(format!("sample index {index} out of range")))?;
        Ok(Sample {
            input: encode_with(img, self.grid, &self.encoding)?,
            label: img.label(),
        })
    }
}
