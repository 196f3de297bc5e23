use std::ops::Range;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{D2nnError, Result};
use crate::optics::{ComplexField, GridSpec};
use crate::training::FieldSet;

fn field_from_mask(grid: GridSpec, mask: impl Fn(usize, usize) -> bool) -> Result<ComplexField> {
    let v = Array2::from_shape_fn(grid.shape(), |(y, x)| {
        Complex64::new(if mask(y, x) { 1.0 } else { 0.0 }, 0.0)
    });
    ComplexField::from_values(grid, v)
}

/// Unit-amplitude disk centered on pixel `(ny/2, nx/2)`; a pixel belongs to
/// the disk when its center lies strictly inside the circle.
pub fn synth_pinhole(grid: GridSpec, diameter: f64) -> Result<ComplexField> {
    if !(diameter >= grid.pitch) {
        return Err(D2nnError::InvalidArgument(format!(
            "pinhole diameter {diameter} m is below the pitch {} m",
            grid.pitch
        )));
    }
    let (cx, cy) = ((grid.nx / 2) as f64, (grid.ny / 2) as f64);
    let r = diameter / 2.0 / grid.pitch;
    field_from_mask(grid, |y, x| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy < r * r
    })
}

fn pixels_of(length: f64, pitch: f64, what: &str) -> Result<usize> {
    if !(length >= 0.0 && length.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!("{what} must be non-negative")));
    }
    Ok((length / pitch).round() as usize)
}

/// Two vertical bars, full plane height, centered horizontally.
pub fn synth_line_pair(grid: GridSpec, line_width: f64, gap: f64) -> Result<ComplexField> {
    synth_line_pair_bars(grid, line_width, gap, None)
}

/// Two vertical bars of `line_width` separated by `gap`, widths rounded to
/// whole pixels. With `length` the bars are that tall and vertically centered.
pub fn synth_line_pair_bars(
    grid: GridSpec,
    line_width: f64,
    gap: f64,
    length: Option<f64>,
) -> Result<ComplexField> {
    let [left, _, right] = line_pair_columns(grid, line_width, gap)?;
    let rows = match length {
        Some(l) => {
            let n = pixels_of(l, grid.pitch, "bar length")?;
            if n == 0 || n > grid.ny {
                return Err(D2nnError::InvalidArgument(format!(
                    "bar length {l} m does not fit the plane"
                )));
            }
            let y0 = (grid.ny - n) / 2;
            y0..y0 + n
        }
        None => 0..grid.ny,
    };
    field_from_mask(grid, |y, x| rows.contains(&y) && (left.contains(&x) || right.contains(&x)))
}

/// Pixel columns of the left bar, the gap and the right bar of a centered
/// line pair, with widths rounded to whole pixels.
pub fn line_pair_columns(grid: GridSpec, line_width: f64, gap: f64) -> Result<[Range<usize>; 3]> {
    if !(line_width >= grid.pitch) {
        return Err(D2nnError::InvalidArgument(format!(
            "line width {line_width} m is below the pitch {} m",
            grid.pitch
        )));
    }
    let w = pixels_of(line_width, grid.pitch, "line width")?;
    let g = pixels_of(gap, grid.pitch, "gap")?;
    let total = 2 * w + g;
    if total > grid.nx {
        return Err(D2nnError::InvalidArgument(format!(
            "bars span {total} pixels on a {}-pixel plane",
            grid.nx
        )));
    }
    let x0 = (grid.nx - total) / 2;
    Ok([x0..x0 + w, x0 + w..x0 + w + g, x0 + w + g..x0 + total])
}

/// 7×7 bitmaps of the letters used for imaging tests.
pub const LETTERS: [(char, [&str; 7]); 4] = [
    ('U', ["#.....#", "#.....#", "#.....#", "#.....#", "#.....#", "#.....#", ".#####."]),
    ('C', [".#####.", "#.....#", "#......", "#......", "#......", "#.....#", ".#####."]),
    ('L', ["#......", "#......", "#......", "#......", "#......", "#......", "#######"]),
    ('A', ["..###..", ".#...#.", "#.....#", "#.....#", "#######", "#.....#", "#.....#"]),
];

/// Binary letter mask whose 7×7 cells are each `round(size / 7 / pitch)` pixels wide.
pub fn synth_letter(grid: GridSpec, letter: char, size: f64) -> Result<ComplexField> {
    let bitmap = LETTERS
        .iter()
        .find(|(c, _)| *c == letter.to_ascii_uppercase())
        .map(|(_, b)| b)
        .ok_or_else(|| D2nnError::InvalidArgument(format!("no bitmap for letter {letter:?}")))?;
    let cell = pixels_of(size / 7.0, grid.pitch, "letter size")?;
    if cell == 0 || 7 * cell > grid.nx.min(grid.ny) {
        return Err(D2nnError::InvalidArgument(format!(
            "letter size {size} m does not fit the plane"
        )));
    }
    let x0 = (grid.nx - 7 * cell) / 2;
    let y0 = (grid.ny - 7 * cell) / 2;
    field_from_mask(grid, |y, x| {
        if x < x0 || y < y0 || x >= x0 + 7 * cell || y >= y0 + 7 * cell {
            return false;
        }
        bitmap[(y - y0) / cell].as_bytes()[(x - x0) / cell] == b'#'
    })
}

/// Two-class steering task: Gaussian spots of width `spot` (1/e radius)
/// left of center are class 0, right of center class 1. Centers sit at
/// `±offset` with uniform jitter up to `jitter` on both axes and amplitudes
/// uniform in `[0.5, 1)`. Classes alternate.
pub fn two_spot_task(grid: GridSpec, count: usize, offset: f64, jitter: f64, spot: f64, seed: u64) -> Result<FieldSet> {
    if !(offset > 0.0 && jitter >= 0.0 && jitter < offset && spot > 0.0) {
        return Err(D2nnError::InvalidArgument(
            "two-spot task needs offset > jitter >= 0 and a positive spot size".into(),
        ));
    }
    if offset + jitter + spot > grid.extent_x() / 2.0 {
        return Err(D2nnError::InvalidArgument("spots fall outside the plane".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: f64| if r > 0.0 { rng.random_range(-r..r) } else { 0.0 };
    let items = (0..count)
        .map(|i| {
            let label = i % 2;
            let side = if label == 0 { -1.0 } else { 1.0 };
            let cx = side * offset + draw(jitter);
            let cy = draw(jitter);
            let amp = 0.75 + draw(0.25);
            let v = Array2::from_shape_fn(grid.shape(), |(y, x)| {
                let r2 = (grid.x_of(x) - cx).powi(2) + (grid.y_of(y) - cy).powi(2);
                Complex64::new(amp * (-r2 / (spot * spot)).exp(), 0.0)
            });
            Ok((ComplexField::from_values(grid, v)?, label))
        })
        .collect::<Result<Vec<_>>>()?;
    FieldSet::labeled(grid, items)
}
