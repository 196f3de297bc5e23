use serde::{Deserialize, Serialize};

use crate::error::{D2nnError, Result};

/// Sampling grid shared by every field, layer and kernel of one model.
///
/// Arrays are stored row-major with `ny` rows and `nx` columns. The pitch is
/// the center-to-center neuron spacing in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        let grid = GridSpec {
            nx,
            ny,
            pitch,
            wavelength,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Square grid of `n` x `n` neurons.
    pub fn square(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        Self::new(n, n, pitch, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(D2nnError::InvalidGrid(format!(
                "need at least 2x2 samples, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(D2nnError::InvalidGrid(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(D2nnError::InvalidGrid(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` as used by ndarray.
    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.pitch
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.pitch
    }

    pub fn pixel_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    /// Physical x coordinate of column `ix`, with the plane centered on the optical axis.
    pub fn x_of(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.pitch
    }

    /// Physical y coordinate of row `iy`.
    pub fn y_of(&self, iy: usize) -> f64 {
        (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(D2nnError::GridMismatch {
                expected: *self,
                actual: *other,
            })
        }
    }
}
