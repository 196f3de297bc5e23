//! Point-spread, resolution, defocus and free-space comparison for imaging models.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{measure_fwhm, resolved, Axis};
use crate::data::{synth_letter, synth_line_pair_bars, synth_pinhole};
use crate::error::{D2nnError, Result};
use crate::optics::{forward_output, make_kernel, propagate, ComplexField, D2nnModel};
use crate::training::loss_image_mse;

/// Targets and sweeps of the imaging battery. Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensBattery {
    pub pinhole_diameters: Vec<f64>,
    pub line_widths: Vec<f64>,
    /// Bar length as a multiple of the line width.
    pub bar_length_factor: f64,
    pub defocus_offsets: Vec<f64>,
    pub defocus_pinhole: f64,
    pub letters: Vec<char>,
    pub letter_size: f64,
    /// Free-space comparison distance; the model's total length when unset.
    pub free_space_distance: Option<f64>,
}

impl Default for LensBattery {
    fn default() -> Self {
        LensBattery {
            pinhole_diameters: vec![1e-3, 2e-3, 3e-3],
            line_widths: (0..6).map(|k| (2.4 - 0.3 * k as f64) * 1e-3).collect(),
            bar_length_factor: 5.0,
            defocus_offsets: (0..=8).map(|k| 2e-3 * k as f64).collect(),
            defocus_pinhole: 3e-3,
            letters: vec!['U', 'C', 'L', 'A'],
            letter_size: 12.6e-3,
            free_space_distance: None,
        }
    }
}

/// FWHM is `None` when the output has no measurable interior peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfRow {
    pub diameter: f64,
    pub fwhm_x: Option<f64>,
    pub fwhm_y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePairRow {
    pub line_width: f64,
    pub contrast: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefocusRow {
    pub offset: f64,
    pub fwhm_x: Option<f64>,
    pub fwhm_y: Option<f64>,
    pub peak_intensity: f64,
}

/// Intensity MSE against the input for the model and for bare free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterRow {
    pub letter: char,
    pub lens_mse: f64,
    pub free_space_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensReport {
    pub free_space_distance: f64,
    pub psf: Vec<PsfRow>,
    pub line_pairs: Vec<LinePairRow>,
    pub defocus: Vec<DefocusRow>,
    pub letters: Vec<LetterRow>,
    /// Targets left out because they do not fit the plane.
    pub skipped: Vec<String>,
}

/// Named output intensities, e.g. `psf_3.0mm`.
pub type RenderedPlanes = Vec<(String, Array2<f64>)>;

fn fwhm(intensity: &Array2<f64>, model: &D2nnModel) -> (Option<f64>, Option<f64>) {
    match measure_fwhm(intensity, model.grid()) {
        Ok((x, y)) => (Some(x), Some(y)),
        Err(_) => (None, None),
    }
}

fn mm(v: f64) -> String {
    format!("{:.1}mm", v * 1e3)
}

fn shifted_input(model: &D2nnModel, offset: f64) -> Result<D2nnModel> {
    if offset == 0.0 {
        return Ok(model.clone());
    }
    D2nnModel::new(
        *model.grid(),
        model.input_gap() + offset,
        model.layers().to_vec(),
        model.kind(),
    )
}

/// Runs every target through `model` and reports metrics plus the rendered
/// output planes.
pub fn run_lens_battery(model: &D2nnModel, battery: &LensBattery) -> Result<(LensReport, RenderedPlanes)> {
    let grid = *model.grid();
    let distance = battery.free_space_distance.unwrap_or_else(|| model.total_length());
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!("free-space distance {distance}")));
    }
    if battery.defocus_offsets.iter().any(|&o| !(o >= 0.0 && o.is_finite())) {
        return Err(D2nnError::InvalidArgument("defocus offsets must be non-negative".into()));
    }
    let mut planes = RenderedPlanes::new();
    let mut skipped = Vec::new();
    let mut fitting = |what: String, target: Result<ComplexField>| match target {
        Ok(f) => Ok(Some(f)),
        Err(D2nnError::InvalidArgument(why)) => {
            log::warn!("skipping {what}: {why}");
            skipped.push(format!("{what}: {why}"));
            Ok(None)
        }
        Err(e) => Err(e),
    };

    let mut pinholes = Vec::new();
    for &d in &battery.pinhole_diameters {
        if let Some(f) = fitting(format!("pinhole {}", mm(d)), synth_pinhole(grid, d))? {
            pinholes.push((d, f));
        }
    }
    let mut bar_targets = Vec::new();
    for &w in &battery.line_widths {
        let t = synth_line_pair_bars(grid, w, w, Some(battery.bar_length_factor * w));
        if let Some(f) = fitting(format!("line pair {}", mm(w)), t)? {
            bar_targets.push((w, f));
        }
    }
    let mut letter_targets = Vec::new();
    for &c in &battery.letters {
        if let Some(f) = fitting(format!("letter {c}"), synth_letter(grid, c, battery.letter_size))? {
            letter_targets.push((c, f));
        }
    }
    let defocus_target = fitting(
        format!("defocus pinhole {}", mm(battery.defocus_pinhole)),
        synth_pinhole(grid, battery.defocus_pinhole),
    )?;

    let psf_out = pinholes
        .par_iter()
        .map(|(_, f)| forward_output(model, f).map(|o| o.intensity()))
        .collect::<Result<Vec<_>>>()?;
    let mut psf = Vec::new();
    for (&(diameter, _), out) in pinholes.iter().zip(psf_out) {
        let (fwhm_x, fwhm_y) = fwhm(&out, model);
        psf.push(PsfRow { diameter, fwhm_x, fwhm_y });
        planes.push((format!("psf_{}", mm(diameter)), out));
    }

    let lp_out = bar_targets
        .par_iter()
        .map(|&(w, ref target)| {
            let out = forward_output(model, target)?.intensity();
            let r = resolved(&out, &grid, Axis::X, w, w)?;
            Ok((out, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut line_pairs = Vec::new();
    for (&(line_width, _), (out, r)) in bar_targets.iter().zip(lp_out) {
        line_pairs.push(LinePairRow {
            line_width,
            contrast: r.contrast,
            resolved: r.resolved,
        });
        planes.push((format!("linepair_{}", mm(line_width)), out));
    }

    let offsets: &[f64] = if defocus_target.is_some() { &battery.defocus_offsets } else { &[] };
    let df_out = offsets
        .par_iter()
        .map(|&o| {
            let pinhole = defocus_target.as_ref().expect("offsets are empty without a target");
            forward_output(&shifted_input(model, o)?, pinhole).map(|f| f.intensity())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut defocus = Vec::new();
    for (&offset, out) in offsets.iter().zip(df_out) {
        let (fwhm_x, fwhm_y) = fwhm(&out, model);
        let peak_intensity = out.iter().cloned().fold(0.0, f64::max);
        defocus.push(DefocusRow {
            offset,
            fwhm_x,
            fwhm_y,
            peak_intensity,
        });
        planes.push((format!("defocus_{}", mm(offset)), out));
    }

    let free_kernel = make_kernel(model.kind(), grid, distance)?;
    let letter_out = letter_targets
        .par_iter()
        .map(|(c, input)| {
            let target = input.intensity();
            let lens = forward_output(model, input)?.intensity();
            let free = propagate(input, &free_kernel)?.intensity();
            let row = LetterRow {
                letter: *c,
                lens_mse: loss_image_mse(&lens, &target)?.loss,
                free_space_mse: loss_image_mse(&free, &target)?.loss,
            };
            Ok((row, lens, free))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut letters = Vec::new();
    for (row, lens, free) in letter_out {
        planes.push((format!("letter_{}_lens", row.letter), lens));
        planes.push((format!("letter_{}_free_space", row.letter), free));
        letters.push(row);
    }

    Ok((
        LensReport {
            free_space_distance: distance,
            psf,
            line_pairs,
            defocus,
            letters,
            skipped,
        },
        planes,
    ))
}

/// Differences between `model` and the five-layer lens geometry
/// (4 mm spacing, 4 mm input gap, 7 mm output gap).
pub fn lens_geometry_warnings(model: &D2nnModel) -> Vec<String> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut warnings = Vec::new();
    if model.num_layers() != 5 {
        warnings.push(format!("{} layers instead of 5", model.num_layers()));
    }
    if !close(model.input_gap(), 4e-3) {
        warnings.push(format!("input gap {} mm instead of 4 mm", model.input_gap() * 1e3));
    }
    let gaps: Vec<f64> = model.layers().iter().map(|l| l.gap_after()).collect();
    if let Some((last, inner)) = gaps.split_last() {
        if inner.iter().any(|&g| !close(g, 4e-3)) {
            warnings.push("layer spacing differs from 4 mm".into());
        }
        if !close(*last, 7e-3) {
            warnings.push(format!("output gap {} mm instead of 7 mm", last * 1e3));
        }
    }
    warnings
}
