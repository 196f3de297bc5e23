use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::PaddedFft;
use super::GridSpec;
use crate::error::{D2nnError, Result};

/// Which free-space propagator a kernel realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Sampled Rayleigh-Sommerfeld point response, transformed to the frequency domain.
    #[default]
    RayleighSommerfeld,
    /// Analytic angular-spectrum transfer function with evanescent waves removed.
    AngularSpectrum,
}

/// Secondary-wave mode radiated by a point source, observed at lateral
/// offset `(dx, dy)` and axial distance `dz`:
///
/// `w = dz/r² · (1/(2πr) + 1/(jλ)) · exp(j2πr/λ)`, `r = √(dx²+dy²+dz²)`.
pub fn rs_point_response(dx: f64, dy: f64, dz: f64, wavelength: f64) -> Complex64 {
    let r2 = dx * dx + dy * dy + dz * dz;
    let r = r2.sqrt();
    // 1/(jλ) = −j/λ
    let amp = Complex64::new(1.0 / (2.0 * PI * r), -1.0 / wavelength) * (dz / r2);
    amp * Complex64::from_polar(1.0, 2.0 * PI * r / wavelength)
}

/// Largest phase change of `exp(j2πr/λ)` between adjacent kernel samples at
/// the corner of the sampled window.
fn corner_phase_step(grid: &GridSpec, dz: f64) -> f64 {
    let step_along = |n_along: usize, n_across: usize| {
        let a = (n_along - 1) as f64 * grid.pitch;
        let b = (n_across - 1) as f64 * grid.pitch;
        let r_outer = (a * a + b * b + dz * dz).sqrt();
        let inner = a - grid.pitch;
        let r_inner = (inner * inner + b * b + dz * dz).sqrt();
        2.0 * PI * (r_outer - r_inner) / grid.wavelength
    };
    step_along(grid.nx, grid.ny).max(step_along(grid.ny, grid.nx))
}

/// Signed sample offset of padded index `i` for a padded length `p`: indices
/// in the upper half wrap to negative offsets.
fn wrapped_offset(i: usize, p: usize) -> isize {
    if i < p / 2 {
        i as isize
    } else {
        i as isize - p as isize
    }
}

/// Frequency (cycles per meter) of DFT bin `k` of length `p`.
fn bin_frequency(k: usize, p: usize, pitch: f64) -> f64 {
    wrapped_offset(k, p) as f64 / (p as f64 * pitch)
}

/// Frequency-domain transfer function for one axial gap.
#[derive(Clone)]
pub struct PropagationKernel {
    grid: GridSpec,
    dz: f64,
    kind: KernelKind,
    padded_nx: usize,
    padded_ny: usize,
    /// Transposed layout, shape `(padded_nx, padded_ny)`.
    transfer_t: Array2<Complex64>,
    fft: Arc<PaddedFft>,
}

impl fmt::Debug for PropagationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropagationKernel")
            .field("grid", &self.grid)
            .field("dz", &self.dz)
            .field("kind", &self.kind)
            .field("padded_nx", &self.padded_nx)
            .field("padded_ny", &self.padded_ny)
            .finish()
    }
}

fn check_dz(dz: f64) -> Result<()> {
    if dz.is_finite() && dz > 0.0 {
        Ok(())
    } else {
        Err(D2nnError::InvalidArgument(format!(
            "propagation distance must be positive, got {dz}"
        )))
    }
}

/// Rayleigh-Sommerfeld kernel: the point response sampled on the 2x padded
/// grid, transformed, and scaled by pitch² so that convolution is the Riemann
/// sum of the superposition integral.
pub fn make_rs_kernel(grid: GridSpec, dz: f64) -> Result<PropagationKernel> {
    grid.validate()?;
    check_dz(dz)?;
    let step = corner_phase_step(&grid, dz);
    if step > PI {
        return Err(D2nnError::Undersampled {
            dz,
            pitch: grid.pitch,
            phase_step: step,
        });
    }
    let (px, py) = (2 * grid.nx, 2 * grid.ny);
    let fft = Arc::new(PaddedFft::new(grid.nx, grid.ny, px, py));
    let area = grid.pixel_area();
    let sampled = Array2::from_shape_fn((py, px), |(iy, ix)| {
        let dx = wrapped_offset(ix, px) as f64 * grid.pitch;
        let dy = wrapped_offset(iy, py) as f64 * grid.pitch;
        rs_point_response(dx, dy, dz, grid.wavelength) * area
    });
    let spectrum = fft.spectrum_of(&sampled);
    let transfer_t = Array2::from_shape_vec((px, py), spectrum).expect("spectrum size");
    Ok(PropagationKernel {
        grid,
        dz,
        kind: KernelKind::RayleighSommerfeld,
        padded_nx: px,
        padded_ny: py,
        transfer_t,
        fft,
    })
}

/// Angular-spectrum kernel: `exp(j2π·dz·√(1/λ² − fx² − fy²))` on propagating
/// frequencies, zero on evanescent ones.
pub fn make_as_kernel(grid: GridSpec, dz: f64) -> Result<PropagationKernel> {
    grid.validate()?;
    check_dz(dz)?;
    let (px, py) = (2 * grid.nx, 2 * grid.ny);
    let fft = Arc::new(PaddedFft::new(grid.nx, grid.ny, px, py));
    let inv_l2 = 1.0 / (grid.wavelength * grid.wavelength);
    let transfer_t = Array2::from_shape_fn((px, py), |(kx, ky)| {
        let fx = bin_frequency(kx, px, grid.pitch);
        let fy = bin_frequency(ky, py, grid.pitch);
        let arg = inv_l2 - fx * fx - fy * fy;
        if arg >= 0.0 {
            Complex64::from_polar(1.0, 2.0 * PI * dz * arg.sqrt())
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(PropagationKernel {
        grid,
        dz,
        kind: KernelKind::AngularSpectrum,
        padded_nx: px,
        padded_ny: py,
        transfer_t,
        fft,
    })
}

pub fn make_kernel(kind: KernelKind, grid: GridSpec, dz: f64) -> Result<PropagationKernel> {
    match kind {
        KernelKind::RayleighSommerfeld => make_rs_kernel(grid, dz),
        KernelKind::AngularSpectrum => make_as_kernel(grid, dz),
    }
}

impl PropagationKernel {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (self.padded_nx, self.padded_ny)
    }

    /// Transfer function in natural layout: shape `(padded_ny, padded_nx)`,
    /// indexed `[ky, kx]` in DFT bin order.
    pub fn transfer(&self) -> ArrayView2<'_, Complex64> {
        self.transfer_t.t()
    }

    /// `(fx, fy)` of the bin at `[ky, kx]`.
    pub fn frequency(&self, ky: usize, kx: usize) -> (f64, f64) {
        (
            bin_frequency(kx, self.padded_nx, self.grid.pitch),
            bin_frequency(ky, self.padded_ny, self.grid.pitch),
        )
    }

    pub(crate) fn apply(&self, input: ArrayView2<'_, Complex64>, adjoint: bool) -> Array2<Complex64> {
        let transfer = self
            .transfer_t
            .as_slice()
            .expect("transfer stored contiguously");
        self.fft.convolve(input, transfer, adjoint)
    }
}
