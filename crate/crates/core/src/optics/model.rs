use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng;

use super::kernel::{make_kernel, KernelKind, PropagationKernel};
use super::layer::{modulate, DiffractiveLayer};
use super::propagate::propagate;
use super::{ComplexField, GridSpec};
use crate::error::{D2nnError, Result};

/// Stack of diffractive layers between an input plane and an output plane.
///
/// Propagation kernels are built once at construction, one per distinct gap.
#[derive(Debug, Clone)]
pub struct D2nnModel {
    grid: GridSpec,
    kind: KernelKind,
    input_gap: f64,
    layers: Vec<DiffractiveLayer>,
    /// `kernels[0]` spans input → layer 1, `kernels[l + 1]` spans layer l → next plane.
    kernels: Vec<Arc<PropagationKernel>>,
}

impl PartialEq for D2nnModel {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.kind == other.kind
            && self.input_gap == other.input_gap
            && self.layers == other.layers
    }
}

/// Pre-modulation fields `m^l` of every layer plus the output-plane field.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) fingerprint: u64,
    pub(crate) pre_modulation: Vec<ComplexField>,
    pub(crate) output: ComplexField,
}

impl ForwardCache {
    pub fn pre_modulation(&self) -> &[ComplexField] {
        &self.pre_modulation
    }

    pub fn output(&self) -> &ComplexField {
        &self.output
    }
}

fn build_kernels(
    grid: GridSpec,
    kind: KernelKind,
    input_gap: f64,
    layers: &[DiffractiveLayer],
) -> Result<Vec<Arc<PropagationKernel>>> {
    let mut cache: HashMap<u64, Arc<PropagationKernel>> = HashMap::new();
    std::iter::once(input_gap)
        .chain(layers.iter().map(DiffractiveLayer::gap_after))
        .map(|dz| {
            if let Some(k) = cache.get(&dz.to_bits()) {
                return Ok(Arc::clone(k));
            }
            let k = Arc::new(make_kernel(kind, grid, dz)?);
            cache.insert(dz.to_bits(), Arc::clone(&k));
            Ok(k)
        })
        .collect()
}

impl D2nnModel {
    pub fn new(
        grid: GridSpec,
        input_gap: f64,
        layers: Vec<DiffractiveLayer>,
        kind: KernelKind,
    ) -> Result<Self> {
        grid.validate()?;
        if layers.is_empty() {
            return Err(D2nnError::InvalidArgument("a model needs at least one layer".into()));
        }
        if !(input_gap.is_finite() && input_gap > 0.0) {
            return Err(D2nnError::InvalidArgument(format!(
                "input gap must be positive, got {input_gap}"
            )));
        }
        for layer in &layers {
            grid.ensure_same(layer.grid())?;
        }
        let kernels = build_kernels(grid, kind, input_gap, &layers)?;
        Ok(D2nnModel {
            grid,
            kind,
            input_gap,
            layers,
            kernels,
        })
    }

    /// `count` phase-only layers with uniform spacing; phases random in
    /// `[0, 2π)` when `rng` is given, zero otherwise.
    pub fn uniform<R: Rng + ?Sized>(
        grid: GridSpec,
        count: usize,
        input_gap: f64,
        layer_gap: f64,
        output_gap: f64,
        kind: KernelKind,
        rng: Option<&mut R>,
    ) -> Result<Self> {
        let mut gaps = vec![layer_gap; count.saturating_sub(1)];
        gaps.push(output_gap);
        Self::with_gaps(grid, input_gap, &gaps, kind, rng)
    }

    /// One phase-only layer per entry of `gaps_after`.
    pub fn with_gaps<R: Rng + ?Sized>(
        grid: GridSpec,
        input_gap: f64,
        gaps_after: &[f64],
        kind: KernelKind,
        mut rng: Option<&mut R>,
    ) -> Result<Self> {
        let layers = gaps_after
            .iter()
            .map(|&gap| match rng.as_deref_mut() {
                Some(r) => DiffractiveLayer::random(grid, gap, r),
                None => DiffractiveLayer::flat(grid, gap),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, input_gap, layers, kind)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn input_gap(&self) -> f64 {
        self.input_gap
    }

    pub fn layers(&self) -> &[DiffractiveLayer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Mutable access to the layer transmissions. Gaps are fixed; use
    /// [`D2nnModel::set_gaps`] to change geometry.
    pub fn layers_mut(&mut self) -> &mut [DiffractiveLayer] {
        &mut self.layers
    }

    pub fn gaps(&self) -> Vec<f64> {
        std::iter::once(self.input_gap)
            .chain(self.layers.iter().map(DiffractiveLayer::gap_after))
            .collect()
    }

    /// Input plane to output plane.
    pub fn total_length(&self) -> f64 {
        self.gaps().iter().sum()
    }

    /// Replaces every gap (`input_gap` followed by one gap per layer) and rebuilds kernels.
    pub fn set_gaps(&mut self, gaps: &[f64]) -> Result<()> {
        if gaps.len() != self.layers.len() + 1 {
            return Err(D2nnError::InvalidArgument(format!(
                "expected {} gaps, got {}",
                self.layers.len() + 1,
                gaps.len()
            )));
        }
        let mut layers = self.layers.clone();
        for (layer, &gap) in layers.iter_mut().zip(&gaps[1..]) {
            layer.set_gap_after(gap)?;
        }
        *self = D2nnModel::new(self.grid, gaps[0], layers, self.kind)?;
        Ok(())
    }

    /// Same layers and geometry with a different propagator.
    pub fn with_kind(&self, kind: KernelKind) -> Result<Self> {
        D2nnModel::new(self.grid, self.input_gap, self.layers.clone(), kind)
    }

    pub fn kernels(&self) -> &[Arc<PropagationKernel>] {
        &self.kernels
    }

    pub fn wrap_phases(&mut self) {
        self.layers.iter_mut().for_each(DiffractiveLayer::wrap_phases);
    }

    /// Hash of every parameter that influences the forward pass.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.kind.hash(&mut h);
        self.input_gap.to_bits().hash(&mut h);
        for layer in &self.layers {
            layer.gap_after().to_bits().hash(&mut h);
            for v in layer.phase().iter().chain(layer.amplitude().iter()) {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn total_neurons(&self) -> usize {
        self.grid.len() * self.layers.len()
    }
}

/// Runs the network and records every layer's input field for the adjoint pass.
pub fn forward(model: &D2nnModel, input: &ComplexField) -> Result<(ComplexField, ForwardCache)> {
    model.grid.ensure_same(input.grid())?;
    let mut pre_modulation = Vec::with_capacity(model.layers.len());
    let mut u = propagate(input, &model.kernels[0])?;
    for (layer, kernel) in model.layers.iter().zip(&model.kernels[1..]) {
        let modulated = modulate(&u, layer)?;
        pre_modulation.push(u);
        u = propagate(&modulated, kernel)?;
    }
    let cache = ForwardCache {
        fingerprint: model.fingerprint(),
        pre_modulation,
        output: u.clone(),
    };
    Ok((u, cache))
}

/// Forward pass without a cache.
pub fn forward_output(model: &D2nnModel, input: &ComplexField) -> Result<ComplexField> {
    model.grid.ensure_same(input.grid())?;
    let mut u = propagate(input, &model.kernels[0])?;
    for (layer, kernel) in model.layers.iter().zip(&model.kernels[1..]) {
        u = propagate(&modulate(&u, layer)?, kernel)?;
    }
    Ok(u)
}

/// All-to-all connections: `N²` per layer for `N` neurons per plane.
pub fn connections_all_to_all(neurons_per_layer: u64, layers: u64) -> u64 {
    neurons_per_layer * neurons_per_layer * layers
}

/// Fully connected count used for the headline figures: every neuron of a
/// layer couples to every neuron of the plane before it.
pub fn connection_count(model: &D2nnModel) -> u64 {
    connections_all_to_all(model.grid.len() as u64, model.layers.len() as u64)
}

/// Connections whose lateral source-target distance is at most `radius`.
pub fn connection_count_within(model: &D2nnModel, radius: f64) -> u64 {
    let g = model.grid;
    let r_px = radius / g.pitch;
    let r2 = r_px * r_px;
    let mut pairs: u64 = 0;
    let max_dx = (g.nx - 1) as i64;
    let max_dy = (g.ny - 1) as i64;
    for dy in -max_dy..=max_dy {
        for dx in -max_dx..=max_dx {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                pairs += (g.nx as i64 - dx.abs()) as u64 * (g.ny as i64 - dy.abs()) as u64;
            }
        }
    }
    pairs * model.layers.len() as u64
}
