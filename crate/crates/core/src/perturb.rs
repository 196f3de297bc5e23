//! Fabrication and assembly imperfections: lateral misalignment, material
//! absorption, absorption dropout and surface phase errors, plus sweeps.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{D2nnError, Result};
use crate::optics::{wrap_phase, D2nnModel, DiffractiveLayer};
use crate::training::{evaluate, DetectorLayout, SampleSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    /// Largest |dx| and |dy| of a layer's lateral displacement, in meters.
    pub lateral_shift_bound: f64,
    /// Fraction of power each layer transmits.
    pub power_transmission_per_layer: f64,
    pub absorption_dropout_prob: f64,
    /// Standard deviation of additive Gaussian phase error standing in for surface errors, radians.
    pub phase_noise_std: f64,
    pub rng_seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            lateral_shift_bound: 0.1e-3,
            power_transmission_per_layer: 1.0,
            absorption_dropout_prob: 0.0,
            phase_noise_std: 0.1,
            rng_seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lateral_shift_bound >= 0.0 && self.lateral_shift_bound.is_finite()) {
            return Err(D2nnError::InvalidArgument("lateral_shift_bound must be >= 0".into()));
        }
        if !(self.power_transmission_per_layer > 0.0 && self.power_transmission_per_layer <= 1.0) {
            return Err(D2nnError::InvalidArgument(
                "power_transmission_per_layer must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.absorption_dropout_prob) {
            return Err(D2nnError::InvalidArgument(
                "absorption_dropout_prob must lie in [0, 1)".into(),
            ));
        }
        if !(self.phase_noise_std >= 0.0 && self.phase_noise_std.is_finite()) {
            return Err(D2nnError::InvalidArgument("phase_noise_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Samples the transmission `t` at `(iy − sy, ix − sx)` with bilinear weights; outside the layer `t = 0`.
fn shift_transmission(t: &Array2<Complex64>, sx: f64, sy: f64) -> Array2<Complex64> {
    let (ny, nx) = t.dim();
    let at = |y: i64, x: i64| {
        if y < 0 || x < 0 || y >= ny as i64 || x >= nx as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            t[[y as usize, x as usize]]
        }
    };
    let ix0 = sx.floor();
    let iy0 = sy.floor();
    let fx = sx - ix0;
    let fy = sy - iy0;
    let (ix0, iy0) = (ix0 as i64, iy0 as i64);
    Array2::from_shape_fn((ny, nx), |(y, x)| {
        // Source position y − sy = (y − iy0 − 1) + (1 − fy).
        let ys = y as i64 - iy0;
        let xs = x as i64 - ix0;
        let mut v = at(ys, xs) * ((1.0 - fx) * (1.0 - fy));
        if fx > 0.0 {
            v += at(ys, xs - 1) * (fx * (1.0 - fy));
        }
        if fy > 0.0 {
            v += at(ys - 1, xs) * ((1.0 - fx) * fy);
            if fx > 0.0 {
                v += at(ys - 1, xs - 1) * (fx * fy);
            }
        }
        v
    })
}

/// Translates one layer by `(dx, dy)` meters. Whole-pixel shifts move the
/// arrays exactly; fractional shifts interpolate the complex transmission.
pub fn shift_layer(layer: &DiffractiveLayer, dx: f64, dy: f64) -> Result<DiffractiveLayer> {
    let g = *layer.grid();
    if !(dx.is_finite() && dy.is_finite()) {
        return Err(D2nnError::InvalidArgument("shift must be finite".into()));
    }
    let t = shift_transmission(&layer.transmission(), dx / g.pitch, dy / g.pitch);
    let amplitude = t.mapv(|v| v.norm().min(1.0));
    let phase = t.mapv(|v| if v.norm() > 0.0 { wrap_phase(v.arg()) } else { 0.0 });
    DiffractiveLayer::new(g, phase, amplitude, layer.gap_after())
}

/// Shifts every layer by an independent uniform draw in `[−bound, bound]` per axis.
pub fn apply_misalignment<R: Rng + ?Sized>(model: &D2nnModel, bound: f64, rng: &mut R) -> Result<D2nnModel> {
    let g = model.grid();
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!("shift bound must be >= 0, got {bound}")));
    }
    if bound >= g.extent_x().min(g.extent_y()) / 4.0 {
        return Err(D2nnError::InvalidArgument(format!(
            "shift bound {bound} m must be below a quarter of the plane extent"
        )));
    }
    if bound == 0.0 {
        return Ok(model.clone());
    }
    let mut out = model.clone();
    for layer in out.layers_mut() {
        let dx = rng.random_range(-bound..=bound);
        let dy = rng.random_range(-bound..=bound);
        *layer = shift_layer(layer, dx, dy)?;
    }
    Ok(out)
}

/// Scales every amplitude by `√power_transmission`.
pub fn apply_attenuation(model: &D2nnModel, power_transmission: f64) -> Result<D2nnModel> {
    if !(power_transmission > 0.0 && power_transmission <= 1.0) {
        return Err(D2nnError::InvalidArgument(format!(
            "power transmission must lie in (0, 1], got {power_transmission}"
        )));
    }
    let s = power_transmission.sqrt();
    let mut out = model.clone();
    for layer in out.layers_mut() {
        let a = layer.amplitude().mapv(|a| a * s);
        layer.set_amplitude(a)?;
    }
    Ok(out)
}

/// Zeroes each neuron's amplitude independently with probability `prob`.
pub fn sample_absorption_dropout<R: Rng + ?Sized>(model: &D2nnModel, prob: f64, rng: &mut R) -> Result<D2nnModel> {
    if !(0.0..1.0).contains(&prob) {
        return Err(D2nnError::InvalidArgument(format!(
            "dropout probability must lie in [0, 1), got {prob}"
        )));
    }
    let mut out = model.clone();
    if prob == 0.0 {
        return Ok(out);
    }
    for layer in out.layers_mut() {
        let mut a = layer.amplitude().clone();
        a.iter_mut().for_each(|v| {
            if rng.random_bool(prob) {
                *v = 0.0;
            }
        });
        layer.set_amplitude(a)?;
    }
    Ok(out)
}

/// Adds zero-mean Gaussian noise of standard deviation `std` to every phase.
pub fn apply_phase_noise<R: Rng + ?Sized>(model: &D2nnModel, std: f64, rng: &mut R) -> Result<D2nnModel> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(D2nnError::InvalidArgument(format!("phase noise std must be >= 0, got {std}")));
    }
    let mut out = model.clone();
    if std == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, std).map_err(|e| D2nnError::InvalidArgument(e.to_string()))?;
    for layer in out.layers_mut() {
        let p = layer.phase().mapv(|p| p + normal.sample(rng));
        layer.set_phase(p)?;
    }
    Ok(out)
}

/// Misalignment, attenuation and surface phase error together, drawn from `spec.rng_seed`.
pub fn apply_combined(model: &D2nnModel, spec: &PerturbationSpec) -> Result<D2nnModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let m = apply_misalignment(model, spec.lateral_shift_bound, &mut rng)?;
    let m = apply_attenuation(&m, spec.power_transmission_per_layer)?;
    apply_phase_noise(&m, spec.phase_noise_std, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bound: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub trial_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Pairs `(i, j)` of row indices where the larger bound `j` scores
    /// more than two combined standard deviations above bound `i`.
    pub monotonicity_violations: Vec<(usize, usize)>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trial `k` of every bound draws from stream `k` of `seed`, so the same
/// trial sees shifts proportional to the bound.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn sweep_misalignment(
    model: &D2nnModel,
    dataset: &dyn SampleSource,
    layout: &DetectorLayout,
    bounds: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepTable> {
    if trials == 0 {
        return Err(D2nnError::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(bounds.len());
    for &bound in bounds {
        let trial_accuracies = (0..trials)
            .into_par_iter()
            .map(|k| {
                let perturbed = apply_misalignment(model, bound, &mut trial_rng(seed, k))?;
                Ok(evaluate(&perturbed, dataset, layout)?.accuracy)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean_accuracy, std_accuracy) = mean_std(&trial_accuracies);
        rows.push(SweepRow {
            bound,
            mean_accuracy,
            std_accuracy,
            trial_accuracies,
        });
    }
    let mut monotonicity_violations = Vec::new();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if rows[j].bound > rows[i].bound {
                let spread = rows[i].std_accuracy.hypot(rows[j].std_accuracy);
                if rows[j].mean_accuracy - rows[i].mean_accuracy > 2.0 * spread
                    && rows[j].mean_accuracy > rows[i].mean_accuracy
                {
                    log::warn!(
                        "accuracy at bound {} exceeds accuracy at smaller bound {}",
                        rows[j].bound,
                        rows[i].bound
                    );
                    monotonicity_violations.push((i, j));
                }
            }
        }
    }
    Ok(SweepTable {
        rows,
        monotonicity_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationRow {
    pub power_transmission: f64,
    pub accuracy: f64,
    pub mean_correct_energy: f64,
}

pub fn sweep_attenuation(
    model: &D2nnModel,
    dataset: &dyn SampleSource,
    layout: &DetectorLayout,
    fractions: &[f64],
) -> Result<Vec<AttenuationRow>> {
    fractions
        .iter()
        .map(|&f| {
            let report = evaluate(&apply_attenuation(model, f)?, dataset, layout)?;
            Ok(AttenuationRow {
                power_transmission: f,
                accuracy: report.accuracy,
                mean_correct_energy: report.mean_correct_energy,
            })
        })
        .collect()
}
