use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::GridSpec;
use crate::error::{D2nnError, Result};

/// Sampled complex scalar field on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Array2<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        ComplexField {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn from_values(grid: GridSpec, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(D2nnError::ShapeMismatch {
                expected: grid.shape(),
                actual: values.dim(),
            });
        }
        Ok(ComplexField { grid, values })
    }

    /// Real, non-negative amplitudes with zero phase.
    pub fn from_amplitude(grid: GridSpec, amplitude: &Array2<f64>) -> Result<Self> {
        Self::from_values(grid, amplitude.mapv(|a| Complex64::new(a, 0.0)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    /// Σ|u|²·pitch².
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }

    pub fn intensity(&self) -> Array2<f64> {
        intensity(self)
    }

    /// Complex inner product ⟨self, other⟩ = Σ conj(self)·other (no area factor).
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Zip::from(&self.values)
            .and(&other.values)
            .fold(Complex64::new(0.0, 0.0), |acc, a, b| acc + a.conj() * b))
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.mapv(|v| v * factor),
        }
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.grid.ensure_same(&other.grid)?;
        Ok(ComplexField {
            grid: self.grid,
            values: &self.values + &other.values,
        })
    }

    /// Relative L2 distance ‖self − other‖ / ‖other‖.
    pub fn relative_l2(&self, reference: &ComplexField) -> Result<f64> {
        self.grid.ensure_same(&reference.grid)?;
        let (num, den) = Zip::from(&self.values)
            .and(&reference.values)
            .fold((0.0, 0.0), |(n, d), a, b| {
                (n + (a - b).norm_sqr(), d + b.norm_sqr())
            });
        Ok(if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Per-pixel intensity |u|².
pub fn intensity(field: &ComplexField) -> Array2<f64> {
    field.values.mapv(|v| v.norm_sqr())
}
