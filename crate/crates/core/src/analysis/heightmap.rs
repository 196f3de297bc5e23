use std::f64::consts::TAU;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{D2nnError, Result};
use crate::optics::{DiffractiveLayer, GridSpec};

/// Material thickness realizing a phase profile as a thin element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    pub grid: GridSpec,
    /// Meters, one value per neuron.
    pub thickness: Array2<f64>,
    pub base_thickness: f64,
    pub refractive_index: f64,
    pub wavelength: f64,
}

impl HeightMap {
    /// Relief of one full 2π wrap, `λ/(n−1)`.
    pub fn max_relief(&self) -> f64 {
        self.wavelength / (self.refractive_index - 1.0)
    }
}

fn check_material(refractive_index: f64, wavelength: f64, base_thickness: f64) -> Result<()> {
    if !(refractive_index > 1.0 && refractive_index.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!(
            "refractive index must exceed 1, got {refractive_index}"
        )));
    }
    if !(wavelength > 0.0 && base_thickness >= 0.0 && base_thickness.is_finite()) {
        return Err(D2nnError::InvalidArgument(
            "wavelength must be positive and base thickness non-negative".into(),
        ));
    }
    Ok(())
}

/// `thickness = base + φ·λ / (2π·(n−1))` with φ in `[0, 2π)`.
pub fn phase_to_heightmap(
    layer: &DiffractiveLayer,
    refractive_index: f64,
    wavelength: f64,
    base_thickness: f64,
) -> Result<HeightMap> {
    check_material(refractive_index, wavelength, base_thickness)?;
    let scale = wavelength / (TAU * (refractive_index - 1.0));
    Ok(HeightMap {
        grid: *layer.grid(),
        thickness: layer.phase().mapv(|p| base_thickness + p * scale),
        base_thickness,
        refractive_index,
        wavelength,
    })
}

pub fn heightmap_to_phase(map: &HeightMap) -> Result<Array2<f64>> {
    check_material(map.refractive_index, map.wavelength, map.base_thickness)?;
    let scale = TAU * (map.refractive_index - 1.0) / map.wavelength;
    Ok(map.thickness.mapv(|h| (h - map.base_thickness) * scale))
}
