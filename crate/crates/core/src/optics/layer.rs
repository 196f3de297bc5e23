use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::Rng;

use super::{ComplexField, GridSpec};
use crate::error::{D2nnError, Result};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// One diffractive layer: per-neuron transmission `t = a·exp(jφ)` plus the
/// axial gap to the next plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractiveLayer {
    grid: GridSpec,
    phase: Array2<f64>,
    amplitude: Array2<f64>,
    gap_after: f64,
}

fn check_gap(gap: f64) -> Result<()> {
    if gap.is_finite() && gap > 0.0 {
        Ok(())
    } else {
        Err(D2nnError::InvalidArgument(format!(
            "layer gap must be positive, got {gap}"
        )))
    }
}

fn check_shape(grid: &GridSpec, a: &Array2<f64>) -> Result<()> {
    if a.dim() != grid.shape() {
        return Err(D2nnError::ShapeMismatch {
            expected: grid.shape(),
            actual: a.dim(),
        });
    }
    Ok(())
}

impl DiffractiveLayer {
    /// Phase-only layer; phases are wrapped into `[0, 2π)`.
    pub fn phase_only(grid: GridSpec, phase: Array2<f64>, gap_after: f64) -> Result<Self> {
        let amplitude = Array2::ones(grid.shape());
        Self::new(grid, phase, amplitude, gap_after)
    }

    pub fn new(
        grid: GridSpec,
        phase: Array2<f64>,
        amplitude: Array2<f64>,
        gap_after: f64,
    ) -> Result<Self> {
        grid.validate()?;
        check_shape(&grid, &phase)?;
        check_shape(&grid, &amplitude)?;
        check_gap(gap_after)?;
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(D2nnError::InvalidArgument("non-finite phase".into()));
        }
        if amplitude.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(D2nnError::InvalidArgument(
                "amplitude must lie in [0, 1] (passive layer)".into(),
            ));
        }
        Ok(DiffractiveLayer {
            grid,
            phase: phase.mapv(wrap_phase),
            amplitude,
            gap_after,
        })
    }

    pub fn flat(grid: GridSpec, gap_after: f64) -> Result<Self> {
        Self::phase_only(grid, Array2::zeros(grid.shape()), gap_after)
    }

    /// Phase-only layer with phases drawn uniformly from `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(grid: GridSpec, gap_after: f64, rng: &mut R) -> Result<Self> {
        let phase = Array2::from_shape_simple_fn(grid.shape(), || rng.random_range(0.0..TAU));
        Self::phase_only(grid, phase, gap_after)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn phase(&self) -> &Array2<f64> {
        &self.phase
    }

    pub fn amplitude(&self) -> &Array2<f64> {
        &self.amplitude
    }

    pub fn gap_after(&self) -> f64 {
        self.gap_after
    }

    pub fn is_phase_only(&self) -> bool {
        self.amplitude.iter().all(|&a| a == 1.0)
    }

    pub fn transmission(&self) -> Array2<Complex64> {
        Zip::from(&self.amplitude)
            .and(&self.phase)
            .map_collect(|&a, &p| Complex64::from_polar(a, p))
    }

    /// Replaces the phase map; values are wrapped.
    pub fn set_phase(&mut self, phase: Array2<f64>) -> Result<()> {
        check_shape(&self.grid, &phase)?;
        self.phase = phase.mapv(wrap_phase);
        Ok(())
    }

    pub fn set_amplitude(&mut self, amplitude: Array2<f64>) -> Result<()> {
        check_shape(&self.grid, &amplitude)?;
        if amplitude.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(D2nnError::InvalidArgument(
                "amplitude must lie in [0, 1] (passive layer)".into(),
            ));
        }
        self.amplitude = amplitude;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn phase_mut(&mut self) -> &mut Array2<f64> {
        &mut self.phase
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array2<f64>) {
        (&mut self.phase, &mut self.amplitude)
    }

    pub(crate) fn amplitude_mut(&mut self) -> &mut Array2<f64> {
        &mut self.amplitude
    }

    pub(crate) fn set_gap_after(&mut self, gap: f64) -> Result<()> {
        check_gap(gap)?;
        self.gap_after = gap;
        Ok(())
    }

    pub fn wrap_phases(&mut self) {
        self.phase.mapv_inplace(wrap_phase);
    }
}

/// Elementwise multiplication of a field by the layer transmission.
pub fn modulate(field: &ComplexField, layer: &DiffractiveLayer) -> Result<ComplexField> {
    layer.grid.ensure_same(field.grid())?;
    let out = Zip::from(field.values())
        .and(&layer.amplitude)
        .and(&layer.phase)
        .map_collect(|&u, &a, &p| u * Complex64::from_polar(a, p));
    ComplexField::from_values(*field.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::square(8, 0.4e-3, 0.75e-3).unwrap()
    }

    fn random_field(seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Array2::from_shape_simple_fn(grid().shape(), || {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        ComplexField::from_values(grid(), v).unwrap()
    }

    #[test]
    fn zero_phase_is_identity() {
        let f = random_field(1);
        let layer = DiffractiveLayer::flat(grid(), 1e-3).unwrap();
        assert_eq!(modulate(&f, &layer).unwrap(), f);
    }

    #[test]
    fn pi_phase_negates() {
        let f = random_field(2);
        let layer =
            DiffractiveLayer::phase_only(grid(), Array2::from_elem(grid().shape(), PI), 1e-3).unwrap();
        let out = modulate(&f, &layer).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a + b).norm() < 1e-15);
        }
    }

    #[test]
    fn phase_only_preserves_magnitude_and_energy() {
        let f = random_field(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = DiffractiveLayer::random(grid(), 1e-3, &mut rng).unwrap();
        let out = modulate(&f, &layer).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        assert!((out.energy() - f.energy()).abs() <= 1e-15 * f.energy());
    }

    #[test]
    fn phases_are_wrapped_on_construction() {
        let phase = Array2::from_shape_fn(grid().shape(), |(y, x)| (x as f64 - y as f64) * 2.5);
        let layer = DiffractiveLayer::phase_only(grid(), phase, 1e-3).unwrap();
        assert!(layer.phase().iter().all(|&p| (0.0..TAU).contains(&p)));
        assert_eq!(wrap_phase(-1e-300), 0.0);
        assert_eq!(wrap_phase(TAU), 0.0);
    }

    #[test]
    fn rejects_gain_and_bad_shapes() {
        let g = grid();
        assert!(DiffractiveLayer::new(g, Array2::zeros(g.shape()), Array2::from_elem(g.shape(), 1.1), 1e-3).is_err());
        assert!(DiffractiveLayer::phase_only(g, Array2::zeros((3, 3)), 1e-3).is_err());
        assert!(DiffractiveLayer::flat(g, 0.0).is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let other = GridSpec::square(8, 0.3e-3, 0.75e-3).unwrap();
        let layer = DiffractiveLayer::flat(other, 1e-3).unwrap();
        assert!(matches!(
            modulate(&random_field(4), &layer),
            Err(D2nnError::GridMismatch { .. })
        ));
    }
}
