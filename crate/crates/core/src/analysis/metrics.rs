use std::ops::Range;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::line_pair_columns;
use crate::error::{D2nnError, Result};
use crate::optics::GridSpec;

/// Michelson contrast at or above which two bars count as resolved.
pub const RESOLVED_CONTRAST: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Profile along x through the central row (vertical bars).
    X,
    /// Profile along y through the central column (horizontal bars).
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub resolved: bool,
    pub contrast: f64,
}

fn check_shape(intensity: &Array2<f64>, grid: &GridSpec) -> Result<()> {
    if intensity.dim() != grid.shape() {
        return Err(D2nnError::ShapeMismatch {
            expected: grid.shape(),
            actual: intensity.dim(),
        });
    }
    Ok(())
}

/// Distance in pixels from `peak` to the interpolated half-maximum crossing,
/// walking in direction `step`.
fn half_width(profile: ArrayView1<f64>, peak: usize, step: isize, half: f64) -> Option<f64> {
    let mut i = peak as isize;
    loop {
        let next = i + step;
        if next < 0 || next as usize >= profile.len() {
            return None;
        }
        let (a, b) = (profile[i as usize], profile[next as usize]);
        if b < half {
            return Some((i - peak as isize).unsigned_abs() as f64 + (a - half) / (a - b));
        }
        i = next;
    }
}

fn fwhm_1d(profile: ArrayView1<f64>, peak: usize, pitch: f64, what: &str) -> Result<f64> {
    let half = profile[peak] / 2.0;
    match (half_width(profile, peak, -1, half), half_width(profile, peak, 1, half)) {
        (Some(l), Some(r)) => Ok((l + r) * pitch),
        _ => Err(D2nnError::NoCrossing(format!(
            "{what} profile never falls below half maximum on both sides of the peak"
        ))),
    }
}

/// Full widths at half maximum along x and y through the intensity peak.
pub fn measure_fwhm(intensity: &Array2<f64>, grid: &GridSpec) -> Result<(f64, f64)> {
    check_shape(intensity, grid)?;
    let mut peak = (0, 0);
    let mut best = f64::NEG_INFINITY;
    for ((y, x), &v) in intensity.indexed_iter() {
        if !v.is_finite() {
            return Err(D2nnError::NoCrossing("non-finite intensity".into()));
        }
        if v > best {
            best = v;
            peak = (y, x);
        }
    }
    let (ny, nx) = intensity.dim();
    let (py, px) = peak;
    if best <= 0.0 || px == 0 || py == 0 || px == nx - 1 || py == ny - 1 {
        return Err(D2nnError::NoCrossing(format!(
            "peak at ({px}, {py}) is not a strict interior maximum"
        )));
    }
    let fx = fwhm_1d(intensity.row(py), px, grid.pitch, "x")?;
    let fy = fwhm_1d(intensity.column(px), py, grid.pitch, "y")?;
    Ok((fx, fy))
}

fn mean(profile: &[f64], cols: Range<usize>) -> f64 {
    profile[cols.clone()].iter().sum::<f64>() / cols.len() as f64
}

/// Michelson contrast of a centered line pair imaged onto the output plane:
/// the dimmer bar's mean intensity against the gap's mean intensity along the
/// central cross-section. Bars and gap sit where the object placed them, so
/// fringes elsewhere on the profile cannot pass for a resolved pair.
pub fn resolved(intensity: &Array2<f64>, grid: &GridSpec, axis: Axis, line_width: f64, gap: f64) -> Result<Resolution> {
    check_shape(intensity, grid)?;
    let profile: Vec<f64> = match axis {
        Axis::X => intensity.row(grid.ny / 2).to_vec(),
        Axis::Y => intensity.column(grid.nx / 2).to_vec(),
    };
    if profile.iter().any(|v| !v.is_finite() || *v < 0.0) || profile.iter().all(|&v| v == 0.0) {
        return Err(D2nnError::DegenerateProfile(
            "cross-section is zero, negative or non-finite".into(),
        ));
    }
    let along = match axis {
        Axis::X => *grid,
        Axis::Y => GridSpec { nx: grid.ny, ny: grid.nx, ..*grid },
    };
    let [left, middle, right] = line_pair_columns(along, line_width, gap)?;
    let top = mean(&profile, left).min(mean(&profile, right));
    let dip = mean(&profile, middle);
    let contrast = if top + dip > 0.0 { (top - dip) / (top + dip) } else { 0.0 };
    Ok(Resolution {
        resolved: contrast >= RESOLVED_CONTRAST,
        contrast,
    })
}
