//! Finite-difference oracle shared by the gradient tests and the acceptance run.
#![allow(dead_code)]

use d2nn::optics::{forward_output, ComplexField, D2nnModel, GridSpec, KernelKind};
use d2nn::training::{sample_gradient, DetectorLayout, DetectorRegion, Objective, Sample};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LAMBDA: f64 = 0.75e-3;
pub const PITCH: f64 = 0.4e-3;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;

pub fn small_model(kind: KernelKind, seed: u64) -> D2nnModel {
    let g = GridSpec::square(16, PITCH, LAMBDA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    D2nnModel::uniform(g, 2, 8e-3, 6e-3, 10e-3, kind, Some(&mut rng)).unwrap()
}

/// Four 1.6 mm squares, one per quadrant.
pub fn quadrant_layout() -> DetectorLayout {
    let c = 1.6e-3;
    DetectorLayout::new(vec![
        DetectorRegion::square(0, -c, -c, 1.6e-3),
        DetectorRegion::square(1, c, -c, 1.6e-3),
        DetectorRegion::square(2, -c, c, 1.6e-3),
        DetectorRegion::square(3, c, c, 1.6e-3),
    ])
    .unwrap()
}

pub fn random_input(g: GridSpec, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_simple_fn(g.shape(), || rng.random_range(0.0..1.0));
    ComplexField::from_amplitude(g, &a).unwrap()
}

pub fn loss_of(model: &D2nnModel, sample: &Sample, objective: &Objective) -> f64 {
    let out = forward_output(model, &sample.input).unwrap();
    objective.loss(&out, sample).unwrap().0.loss
}

/// `L(plus) − L(minus)` assembled from per-pixel intensity differences.
///
/// Some phase derivatives are 1e-5 of the largest one, so subtracting two
/// nearly equal loss totals would lose them to rounding. Each branch is an
/// exact algebraic rewrite of the plain difference.
pub fn loss_difference(plus: &D2nnModel, minus: &D2nnModel, sample: &Sample, objective: &Objective) -> f64 {
    let ip = forward_output(plus, &sample.input).unwrap().intensity();
    let im = forward_output(minus, &sample.input).unwrap().intensity();
    let di = &ip - &im;
    let Some(masks) = objective.masks() else {
        // Image loss: (I₊ − I₋)(I₊ + I₋ − 2T)/N per pixel.
        let target = sample.input.intensity();
        let n = target.len() as f64;
        return ndarray::Zip::from(&di)
            .and(&ip)
            .and(&im)
            .and(&target)
            .fold(0.0, |acc, &d, &p, &m, &t| acc + d * (p + m - 2.0 * t))
            / n;
    };
    let area = masks.grid().pixel_area();
    let s = masks.signals(&im).unwrap();
    let ds = masks.signals(&di).unwrap();
    let e = im.sum() * area;
    let de = di.sum() * area;
    // Change of the normalized signal s/E without cancellation.
    let dfrac: Vec<f64> = s
        .iter()
        .zip(&ds)
        .map(|(s, ds)| (ds * e - s * de) / ((e + de) * e))
        .collect();
    let label = sample.label.unwrap();
    match *objective {
        Objective::SoftmaxCe { temperature, .. } => {
            let z: Vec<f64> = s.iter().map(|v| temperature * v / e).collect();
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let total: f64 = w.iter().sum();
            let mix: f64 = w
                .iter()
                .zip(&dfrac)
                .map(|(w, d)| w / total * (temperature * d).exp_m1())
                .sum();
            mix.ln_1p() - temperature * dfrac[label]
        }
        Objective::DetectorMse { .. } => {
            let k = s.len() as f64;
            (0..s.len())
                .map(|c| {
                    let frac = s[c] / e;
                    let target = if c == label { 1.0 } else { 0.0 };
                    dfrac[c] * (2.0 * frac + dfrac[c] - 2.0 * target)
                })
                .sum::<f64>()
                / k
        }
        Objective::ImageMse => unreachable!(),
    }
}

pub fn perturbed_phase(model: &D2nnModel, layer: usize, idx: (usize, usize), delta: f64) -> D2nnModel {
    let mut m = model.clone();
    let mut p = m.layers()[layer].phase().clone();
    p[idx] += delta;
    m.layers_mut()[layer].set_phase(p).unwrap();
    m
}

/// Largest relative deviation over every phase of every layer.
pub fn worst_phase_error(model: &D2nnModel, sample: &Sample, objective: &Objective) -> f64 {
    let analytic = sample_gradient(model, sample, objective).unwrap().grads;
    let mut worst: f64 = 0.0;
    for (l, grad) in analytic.phase.iter().enumerate() {
        for (idx, &g) in grad.indexed_iter() {
            let plus = perturbed_phase(model, l, idx, FD_STEP);
            let minus = perturbed_phase(model, l, idx, -FD_STEP);
            let fd = loss_difference(&plus, &minus, sample, objective) / (2.0 * FD_STEP);
            let scale = fd.abs().max(g.abs()).max(1e-9);
            worst = worst.max((fd - g).abs() / scale);
        }
    }
    worst
}
