use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{D2nnError, Result};
use crate::optics::{propagate_adjoint, ComplexField, D2nnModel, ForwardCache};

/// Per-layer gradients of a real loss with respect to the layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub phase: Vec<Array2<f64>>,
    pub amplitude: Vec<Array2<f64>>,
}

impl LayerGradients {
    pub fn zeros_like(model: &D2nnModel) -> Self {
        let shape = model.grid().shape();
        LayerGradients {
            phase: vec![Array2::zeros(shape); model.num_layers()],
            amplitude: vec![Array2::zeros(shape); model.num_layers()],
        }
    }

    pub fn add_assign(&mut self, other: &LayerGradients) {
        for (a, b) in self.phase.iter_mut().zip(&other.phase) {
            *a += b;
        }
        for (a, b) in self.amplitude.iter_mut().zip(&other.amplitude) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.phase.iter_mut().chain(self.amplitude.iter_mut()) {
            a.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phase
            .iter()
            .chain(&self.amplitude)
            .all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Adjoint pass through the propagate/modulate chain.
///
/// `grad_output` is `∂L/∂Re u + j·∂L/∂Im u` at the output plane. Each
/// propagation is transposed by propagating with the conjugate transfer
/// function and each modulation `o = t·m` by multiplying with `conj(t)`.
/// With `o = a·e^{jφ}·m` the parameter gradients are
/// `∂L/∂φ = Im(conj(o)·g_o)` and `∂L/∂a = Re(conj(g_o)·e^{jφ}·m)`.
pub fn backward(
    model: &D2nnModel,
    cache: &ForwardCache,
    grad_output: &ComplexField,
) -> Result<LayerGradients> {
    model.grid().ensure_same(grad_output.grid())?;
    if cache.fingerprint != model.fingerprint() || cache.pre_modulation.len() != model.num_layers() {
        return Err(D2nnError::StaleCache);
    }
    let kernels = model.kernels();
    let mut phase = Vec::with_capacity(model.num_layers());
    let mut amplitude = Vec::with_capacity(model.num_layers());
    let mut g = grad_output.clone();
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let g_out = propagate_adjoint(&g, &kernels[l + 1])?;
        let m = &cache.pre_modulation[l];
        let mut dphi = Array2::zeros(model.grid().shape());
        let mut damp = Array2::zeros(model.grid().shape());
        let mut g_in = Array2::zeros(model.grid().shape());
        let t = layer.transmission();
        Zip::from(&mut dphi)
            .and(&mut g_in)
            .and(m.values())
            .and(g_out.values())
            .and(&t)
            .for_each(|dphi, gin, &m, &go, &t| {
                *dphi = ((t * m).conj() * go).im;
                *gin = t.conj() * go;
            });
        Zip::from(&mut damp)
            .and(m.values())
            .and(g_out.values())
            .and(layer.phase())
            .for_each(|damp, &m, &go, &p| {
                *damp = (go.conj() * Complex64::from_polar(1.0, p) * m).re;
            });
        phase.push(dphi);
        amplitude.push(damp);
        g = ComplexField::from_values(*model.grid(), g_in)?;
    }
    phase.reverse();
    amplitude.reverse();
    Ok(LayerGradients { phase, amplitude })
}
