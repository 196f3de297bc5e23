use ndarray::{Array2, Zip};

use crate::error::{D2nnError, Result};
use crate::optics::D2nnModel;

use super::backward::LayerGradients;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one array per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Adam {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(D2nnError::InvalidArgument(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(D2nnError::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {b}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(D2nnError::InvalidArgument("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(
        &self,
        state: &mut AdamState,
        params: &mut [&mut Array2<f64>],
        grads: &[&Array2<f64>],
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(D2nnError::InvalidArgument(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.dim() != g.dim() {
                return Err(D2nnError::ShapeMismatch {
                    expected: p.dim(),
                    actual: g.dim(),
                });
            }
        }
        if state.m.is_empty() {
            state.m = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
            state.v = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
        } else if state.m.len() != grads.len() || state.m.iter().zip(grads).any(|(m, g)| m.dim() != g.dim()) {
            return Err(D2nnError::InvalidArgument(
                "optimizer state does not match parameter shapes".into(),
            ));
        }
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        {
            Zip::from(&mut **p).and(*g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// Adam step on every layer phase, followed by wrapping to `[0, 2π)`.
/// Amplitudes are stepped too when `train_amplitude` is set, then clamped to `[0, 1]`.
pub fn adam_step(
    model: &mut D2nnModel,
    grads: &LayerGradients,
    state: &mut AdamState,
    adam: &Adam,
    train_amplitude: bool,
) -> Result<()> {
    if grads.phase.len() != model.num_layers() {
        return Err(D2nnError::InvalidArgument(format!(
            "{} gradient arrays for {} layers",
            grads.phase.len(),
            model.num_layers()
        )));
    }
    let mut grad_refs: Vec<&Array2<f64>> = grads.phase.iter().collect();
    if train_amplitude {
        grad_refs.extend(grads.amplitude.iter());
    }
    {
        let (phases, amps): (Vec<_>, Vec<_>) =
            model.layers_mut().iter_mut().map(|l| l.params_mut()).unzip();
        let mut params: Vec<&mut Array2<f64>> = phases;
        if train_amplitude {
            params.extend(amps);
        }
        adam.step(state, &mut params, &grad_refs)?;
    }
    model.wrap_phases();
    if train_amplitude {
        for layer in model.layers_mut() {
            layer.amplitude_mut().mapv_inplace(|a| a.clamp(0.0, 1.0));
        }
    }
    Ok(())
}
