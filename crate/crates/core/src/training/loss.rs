//! Training losses on output-plane intensity.
//!
//! Every loss returns its gradient with respect to the intensity map; the
//! field gradient handed to the adjoint pass is `2·(∂L/∂I)·u` (see
//! [`intensity_grad_to_field`]).

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::detector::DetectorMasks;
use crate::error::{D2nnError, Result};
use crate::optics::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross-entropy over energy-normalized detector signals.
    #[default]
    SoftmaxCe,
    /// Squared error between normalized detector energies and the one-hot target.
    DetectorMse,
    /// Pixelwise squared error against a target intensity image.
    ImageMse,
}

/// Value and gradient of a loss defined on detector signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLoss {
    pub loss: f64,
    pub grad_signals: Vec<f64>,
    /// Gradient with respect to the total output-plane energy used for normalization.
    pub grad_total: f64,
}

/// Softmax cross-entropy with logits `temperature · s_c / total_energy`.
///
/// Normalizing by the whole-plane energy (not just the detector sum) rewards
/// steering light into the correct region rather than merely away from the
/// wrong ones.
pub fn loss_softmax_ce(
    signals: &[f64],
    total_energy: f64,
    label: usize,
    temperature: f64,
) -> Result<SignalLoss> {
    if label >= signals.len() {
        return Err(D2nnError::InvalidArgument(format!(
            "label {label} out of range for {} detectors",
            signals.len()
        )));
    }
    if signals.iter().any(|&s| !(s >= 0.0)) {
        return Err(D2nnError::InvalidArgument("detector signals must be non-negative".into()));
    }
    if signals.iter().all(|&s| s == 0.0) || !(total_energy > 0.0) {
        return Err(D2nnError::ZeroEnergy);
    }
    let logits: Vec<f64> = signals.iter().map(|s| temperature * s / total_energy).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];

    let dlogits: Vec<f64> = exps
        .iter()
        .enumerate()
        .map(|(c, e)| e / sum - if c == label { 1.0 } else { 0.0 })
        .collect();
    let grad_signals = dlogits.iter().map(|d| d * temperature / total_energy).collect();
    let grad_total = -temperature / (total_energy * total_energy)
        * dlogits.iter().zip(signals).map(|(d, s)| d * s).sum::<f64>();
    Ok(SignalLoss {
        loss,
        grad_signals,
        grad_total,
    })
}

/// Loss value and gradient with respect to an intensity map.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityLoss {
    pub loss: f64,
    pub grad_intensity: Array2<f64>,
}

fn total_energy(intensity: &Array2<f64>, area: f64) -> f64 {
    intensity.sum() * area
}

/// Pushes signal-space gradients back onto the intensity map.
fn signal_grad_to_intensity(masks: &DetectorMasks, grad_signals: &[f64], grad_total: f64) -> Array2<f64> {
    let area = masks.grid().pixel_area();
    masks
        .owner()
        .mapv(|o| area * (grad_total + o.map_or(0.0, |c| grad_signals[c])))
}

/// [`loss_softmax_ce`] evaluated on an intensity map.
pub fn softmax_ce_on_intensity(
    intensity: &Array2<f64>,
    masks: &DetectorMasks,
    label: usize,
    temperature: f64,
) -> Result<(IntensityLoss, Vec<f64>)> {
    let signals = masks.signals(intensity)?;
    let total = total_energy(intensity, masks.grid().pixel_area());
    let l = loss_softmax_ce(&signals, total, label, temperature)?;
    let grad_intensity = signal_grad_to_intensity(masks, &l.grad_signals, l.grad_total);
    Ok((
        IntensityLoss {
            loss: l.loss,
            grad_intensity,
        },
        signals,
    ))
}

/// Mean squared error between `s_c / E_total` and the one-hot vector of `label`.
pub fn loss_detector_mse(
    intensity: &Array2<f64>,
    masks: &DetectorMasks,
    label: usize,
) -> Result<(IntensityLoss, Vec<f64>)> {
    let k = masks.num_classes();
    if label >= k {
        return Err(D2nnError::InvalidArgument(format!(
            "label {label} out of range for {k} detectors"
        )));
    }
    let signals = masks.signals(intensity)?;
    let total = total_energy(intensity, masks.grid().pixel_area());
    if !(total > 0.0) {
        return Err(D2nnError::ZeroEnergy);
    }
    let mut loss = 0.0;
    let mut g = vec![0.0; k];
    for c in 0..k {
        let diff = signals[c] / total - if c == label { 1.0 } else { 0.0 };
        loss += diff * diff;
        g[c] = 2.0 * diff / k as f64;
    }
    loss /= k as f64;
    // e_c = s_c / E  ⇒  ∂e_c/∂s_c = 1/E, ∂e_c/∂E = −s_c/E².
    let grad_signals: Vec<f64> = g.iter().map(|gc| gc / total).collect();
    let grad_total = -g.iter().zip(&signals).map(|(gc, s)| gc * s).sum::<f64>() / (total * total);
    let grad_intensity = signal_grad_to_intensity(masks, &grad_signals, grad_total);
    Ok((
        IntensityLoss {
            loss,
            grad_intensity,
        },
        signals,
    ))
}

/// Mean squared error between two images of equal shape.
pub fn loss_image_mse(output: &Array2<f64>, target: &Array2<f64>) -> Result<IntensityLoss> {
    if output.dim() != target.dim() {
        return Err(D2nnError::ShapeMismatch {
            expected: target.dim(),
            actual: output.dim(),
        });
    }
    let n = output.len() as f64;
    let diff = output - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad_intensity = diff.mapv(|d| 2.0 * d / n);
    Ok(IntensityLoss {
        loss,
        grad_intensity,
    })
}

/// Converts `∂L/∂I` into the field gradient `∂L/∂Re u + j·∂L/∂Im u = 2·(∂L/∂I)·u`.
pub fn intensity_grad_to_field(field: &ComplexField, grad_intensity: &Array2<f64>) -> Result<ComplexField> {
    if grad_intensity.dim() != field.grid().shape() {
        return Err(D2nnError::ShapeMismatch {
            expected: field.grid().shape(),
            actual: grad_intensity.dim(),
        });
    }
    let g = Zip::from(field.values())
        .and(grad_intensity)
        .map_collect(|&u, &gi| u * Complex64::new(2.0 * gi, 0.0));
    ComplexField::from_values(*field.grid(), g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::GridSpec;
    use crate::training::detector::DetectorLayout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    #[allow(clippy::approx_constant)]
    fn equal_signals_give_ln_ten() {
        let s = vec![0.05; 10];
        for label in 0..10 {
            let l = loss_softmax_ce(&s, 1.0, label, 10.0).unwrap();
            assert!((l.loss - 10f64.ln()).abs() < 1e-12);
            assert!((l.loss - 2.302585).abs() < 1e-6);
        }
    }

    #[test]
    fn dominant_signal_drives_loss_to_zero() {
        let mut s = vec![0.0; 10];
        s[4] = 1.0;
        let mut last = f64::INFINITY;
        for t in [1.0, 5.0, 10.0, 20.0, 40.0] {
            let l = loss_softmax_ce(&s, 1.0, 4, t).unwrap().loss;
            // All energy in the labelled detector: loss = ln(1 + 9·e^{−T}).
            assert!((l - (9.0 * (-t).exp()).ln_1p()).abs() < 1e-12);
            assert!(l < last);
            last = l;
        }
        assert!(last < 1e-15);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..10).map(|_| rng.random_range(0.01..1.0)).collect();
        let total = s.iter().sum::<f64>() * 1.7;
        let (label, t) = (6, 8.0);
        let l = loss_softmax_ce(&s, total, label, t).unwrap();
        let h = 1e-6;
        for c in 0..10 {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[c] += h;
            sm[c] -= h;
            let fd = (loss_softmax_ce(&sp, total, label, t).unwrap().loss
                - loss_softmax_ce(&sm, total, label, t).unwrap().loss)
                / (2.0 * h);
            assert!((fd - l.grad_signals[c]).abs() < 1e-8, "c={c}: {fd} vs {}", l.grad_signals[c]);
        }
        let fd = (loss_softmax_ce(&s, total + h, label, t).unwrap().loss
            - loss_softmax_ce(&s, total - h, label, t).unwrap().loss)
            / (2.0 * h);
        assert!((fd - l.grad_total).abs() < 1e-8);
    }

    #[test]
    fn softmax_rejects_zero_signals() {
        assert!(matches!(
            loss_softmax_ce(&[0.0; 10], 1.0, 0, 10.0),
            Err(D2nnError::ZeroEnergy)
        ));
    }

    fn masks() -> DetectorMasks {
        let g = GridSpec::square(40, 0.4e-3, 0.75e-3).unwrap();
        DetectorLayout::default_ten(&g).masks(&g).unwrap()
    }

    #[test]
    fn detector_mse_reference_values() {
        let m = masks();
        let g = *m.grid();
        // Everything in region 2.
        let perfect = m.owner().mapv(|o| if o == Some(2) { 1.0 } else { 0.0 });
        assert!(loss_detector_mse(&perfect, &m, 2).unwrap().0.loss.abs() < 1e-15);
        // Equal energy in all ten regions, nothing elsewhere.
        let uniform = m.owner().mapv(|o| if o.is_some() { 1.0 } else { 0.0 });
        let l = loss_detector_mse(&uniform, &m, 7).unwrap().0.loss;
        assert!((l - 0.09).abs() < 1e-12, "{l}");
        assert!(matches!(
            loss_detector_mse(&Array2::zeros(g.shape()), &m, 0),
            Err(D2nnError::ZeroEnergy)
        ));
    }

    fn fd_check<F: Fn(&Array2<f64>) -> (f64, Array2<f64>)>(i0: &Array2<f64>, f: F, tol: f64) {
        let (_, grad) = f(i0);
        // Per-pixel derivatives are ~1/N, so a small step drowns in rounding.
        let h = 1e-3;
        for idx in [(0, 0), (5, 7), (12, 3), (20, 20), (30, 11), (8, 26), (39, 39)] {
            let mut ip = i0.clone();
            let mut im = i0.clone();
            ip[idx] += h;
            im[idx] -= h;
            let fd = (f(&ip).0 - f(&im).0) / (2.0 * h);
            let scale = fd.abs().max(grad[idx].abs()).max(1e-12);
            assert!((fd - grad[idx]).abs() / scale < tol, "{idx:?}: {fd} vs {}", grad[idx]);
        }
    }

    #[test]
    fn intensity_loss_gradients_match_finite_differences() {
        let m = masks();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let i0 = Array2::from_shape_simple_fn(m.grid().shape(), || rng.random_range(0.1..1.0));
        fd_check(&i0, |i| {
            let (l, _) = loss_detector_mse(i, &m, 3).unwrap();
            (l.loss, l.grad_intensity)
        }, 1e-7);
        fd_check(&i0, |i| {
            let (l, _) = softmax_ce_on_intensity(i, &m, 3, 10.0).unwrap();
            (l.loss, l.grad_intensity)
        }, 1e-7);
    }

    #[test]
    fn image_mse_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_simple_fn((6, 5), || rng.random::<f64>());
        assert_eq!(loss_image_mse(&a, &a).unwrap().loss, 0.0);
        let shifted = &a + 1.0;
        assert!((loss_image_mse(&a, &shifted).unwrap().loss - 1.0).abs() < 1e-15);
        let b = Array2::from_shape_simple_fn((6, 5), || rng.random::<f64>());
        let l = loss_image_mse(&a, &b).unwrap();
        for ((x, y), g) in a.iter().zip(b.iter()).zip(l.grad_intensity.iter()) {
            assert!((g - 2.0 * (x - y) / 30.0).abs() < 1e-15);
        }
        assert!(loss_image_mse(&a, &Array2::zeros((5, 6))).is_err());
    }
}
