//! Zero-padded 2D FFT convolution.
//!
//! Spectra are kept in transposed (column-major) layout: element `(kx, ky)`
//! lives at `kx * py + ky`. The forward transform skips the all-zero padding
//! rows and the inverse transform only reconstructs the rows that survive the
//! crop, so one convolution costs three passes of 1D FFTs instead of four.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct PaddedFft {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PaddedFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaddedFft")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("px", &self.px)
            .field("py", &self.py)
            .finish()
    }
}

impl PaddedFft {
    pub fn new(nx: usize, ny: usize, px: usize, py: usize) -> Self {
        assert!(px >= nx && py >= ny);
        let mut planner = FftPlanner::new();
        PaddedFft {
            nx,
            ny,
            px,
            py,
            row_fwd: planner.plan_fft_forward(px),
            row_inv: planner.plan_fft_inverse(px),
            col_fwd: planner.plan_fft_forward(py),
            col_inv: planner.plan_fft_inverse(py),
        }
    }

    fn scratch_len(&self) -> usize {
        [&self.row_fwd, &self.row_inv, &self.col_fwd, &self.col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0)
    }

    /// Full forward DFT of a `py x px` array, returned in transposed layout.
    pub fn spectrum_of(&self, padded: &Array2<Complex64>) -> Vec<Complex64> {
        assert_eq!(padded.dim(), (self.py, self.px));
        let (px, py) = (self.px, self.py);
        let mut scratch = vec![Complex64::default(); self.scratch_len()];
        let mut rows: Vec<Complex64> = padded.iter().copied().collect();
        self.row_fwd.process_with_scratch(&mut rows, &mut scratch);
        let mut cols = vec![Complex64::default(); px * py];
        transpose_into(&rows, &mut cols, py, px, py);
        self.col_fwd.process_with_scratch(&mut cols, &mut scratch);
        cols
    }

    /// crop(IDFT(transfer · DFT(pad(input)))), with `conj_transfer` selecting
    /// the adjoint operator.
    pub fn convolve(
        &self,
        input: ArrayView2<'_, Complex64>,
        transfer_t: &[Complex64],
        conj_transfer: bool,
    ) -> Array2<Complex64> {
        let (nx, ny, px, py) = (self.nx, self.ny, self.px, self.py);
        assert_eq!(input.dim(), (ny, nx));
        assert_eq!(transfer_t.len(), px * py);

        let mut scratch = vec![Complex64::default(); self.scratch_len()];
        let mut rows = vec![Complex64::default(); ny * px];
        for (row_in, row_out) in input.outer_iter().zip(rows.chunks_exact_mut(px)) {
            for (dst, src) in row_out.iter_mut().zip(row_in.iter()) {
                *dst = *src;
            }
        }
        self.row_fwd.process_with_scratch(&mut rows, &mut scratch);

        let mut cols = vec![Complex64::default(); px * py];
        transpose_into(&rows, &mut cols, ny, px, py);
        self.col_fwd.process_with_scratch(&mut cols, &mut scratch);
        if conj_transfer {
            for (c, h) in cols.iter_mut().zip(transfer_t) {
                *c *= h.conj();
            }
        } else {
            for (c, h) in cols.iter_mut().zip(transfer_t) {
                *c *= h;
            }
        }
        self.col_inv.process_with_scratch(&mut cols, &mut scratch);

        // Back to row-major, keeping only the rows inside the crop window.
        for y in 0..ny {
            let row = &mut rows[y * px..(y + 1) * px];
            for (x, dst) in row.iter_mut().enumerate() {
                *dst = cols[x * py + y];
            }
        }
        self.row_inv.process_with_scratch(&mut rows, &mut scratch);

        let norm = 1.0 / (px * py) as f64;
        Array2::from_shape_fn((ny, nx), |(y, x)| rows[y * px + x] * norm)
    }
}

/// Writes the first `rows` rows of a row-major `rows x cols` block into a
/// column-major buffer with column stride `stride`.
fn transpose_into(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize, stride: usize) {
    const BLOCK: usize = 32;
    for y0 in (0..rows).step_by(BLOCK) {
        for x0 in (0..cols).step_by(BLOCK) {
            for y in y0..(y0 + BLOCK).min(rows) {
                for x in x0..(x0 + BLOCK).min(cols) {
                    dst[x * stride + y] = src[y * cols + x];
                }
            }
        }
    }
}
