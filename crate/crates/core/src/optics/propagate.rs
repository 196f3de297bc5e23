use ndarray::Array2;
use num_complex::Complex64;

use super::kernel::rs_point_response;
use super::{ComplexField, PropagationKernel};
use crate::error::{D2nnError, Result};

/// Plane-to-plane propagation by zero-padded FFT convolution.
pub fn propagate(field: &ComplexField, kernel: &PropagationKernel) -> Result<ComplexField> {
    kernel.grid().ensure_same(field.grid())?;
    let out = kernel.apply(field.values().view(), false);
    ComplexField::from_values(*field.grid(), out)
}

/// Adjoint of [`propagate`]: the same convolution with the conjugated
/// transfer function. For angular-spectrum kernels this is the inverse on
/// propagating frequencies.
pub fn propagate_adjoint(field: &ComplexField, kernel: &PropagationKernel) -> Result<ComplexField> {
    kernel.grid().ensure_same(field.grid())?;
    let out = kernel.apply(field.values().view(), true);
    ComplexField::from_values(*field.grid(), out)
}

/// Largest grid accepted by [`direct_rs_sum`].
pub const DIRECT_SUM_LIMIT: usize = 64 * 64;

/// Brute-force O(N²) superposition of Rayleigh-Sommerfeld secondary waves.
///
/// Reference implementation for tests; refuses grids above 64x64.
pub fn direct_rs_sum(field: &ComplexField, dz: f64) -> Result<ComplexField> {
    let grid = *field.grid();
    if grid.len() > DIRECT_SUM_LIMIT {
        return Err(D2nnError::DirectSumTooLarge {
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    if !(dz.is_finite() && dz > 0.0) {
        return Err(D2nnError::InvalidArgument(format!(
            "propagation distance must be positive, got {dz}"
        )));
    }
    let area = grid.pixel_area();
    let sources: Vec<(usize, usize, Complex64)> = field
        .values()
        .indexed_iter()
        .filter(|(_, v)| v.norm_sqr() != 0.0)
        .map(|((y, x), v)| (y, x, *v))
        .collect();
    let out = Array2::from_shape_fn(grid.shape(), |(iy, ix)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(sy, sx, amp) in &sources {
            let dx = (ix as f64 - sx as f64) * grid.pitch;
            let dy = (iy as f64 - sy as f64) * grid.pitch;
            acc += amp * rs_point_response(dx, dy, dz, grid.wavelength);
        }
        acc * area
    });
    ComplexField::from_values(grid, out)
}
