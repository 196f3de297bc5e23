use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{argmax, DetectorLayout};
use super::loss::loss_image_mse;
use super::source::SampleSource;
use super::train::REDUCE_CHUNK;
use crate::error::{D2nnError, Result};
use crate::optics::{forward_output, D2nnModel};

/// Classification summary over a labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_samples: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// Mean fraction of total output-plane energy collected by each detector, one row per true class.
    pub energy_distribution: Vec<Vec<f64>>,
    /// Fraction of total output energy in the correct detector, averaged over all samples.
    pub mean_correct_energy: f64,
}

impl EvalReport {
    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn class_counts(&self) -> Vec<u64> {
        self.confusion.iter().map(|row| row.iter().sum()).collect()
    }

    /// Diagonal of [`EvalReport::energy_distribution`].
    pub fn correct_energy_per_class(&self) -> Vec<f64> {
        (0..self.num_classes())
            .map(|c| self.energy_distribution[c][c])
            .collect()
    }
}

struct Tally {
    confusion: Vec<Vec<u64>>,
    energy: Vec<Vec<f64>>,
    correct_energy: f64,
}

impl Tally {
    fn new(k: usize) -> Self {
        Tally {
            confusion: vec![vec![0; k]; k],
            energy: vec![vec![0.0; k]; k],
            correct_energy: 0.0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.confusion.iter_mut().zip(other.confusion) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.energy.iter_mut().zip(other.energy) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.correct_energy += other.correct_energy;
        self
    }
}

/// Runs every sample and reads out the detector with the largest signal.
pub fn evaluate(model: &D2nnModel, dataset: &dyn SampleSource, layout: &DetectorLayout) -> Result<EvalReport> {
    model.grid().ensure_same(&dataset.grid())?;
    let masks = layout.masks(model.grid())?;
    let k = masks.num_classes();
    let area = model.grid().pixel_area();
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let mut parts = indices
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut t = Tally::new(k);
            for &i in chunk {
                let sample = dataset.sample(i)?;
                let label = sample
                    .label
                    .ok_or_else(|| D2nnError::InvalidArgument(format!("sample {i} has no label")))?;
                if label >= k {
                    return Err(D2nnError::InvalidArgument(format!(
                        "label {label} of sample {i} has no detector"
                    )));
                }
                let intensity = forward_output(model, &sample.input)?.intensity();
                let signals = masks.signals(&intensity)?;
                let total = intensity.sum() * area;
                t.confusion[label][argmax(&signals)] += 1;
                if total > 0.0 {
                    for (e, s) in t.energy[label].iter_mut().zip(&signals) {
                        *e += s / total;
                    }
                    t.correct_energy += signals[label] / total;
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    // Fixed-order pairwise reduction keeps results independent of thread count.
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        parts = next;
    }
    let tally = parts.pop().unwrap_or_else(|| Tally::new(k));
    let n = dataset.len();
    let correct: u64 = (0..k).map(|c| tally.confusion[c][c]).sum();
    let energy_distribution = tally
        .energy
        .iter()
        .zip(&tally.confusion)
        .map(|(row, counts)| {
            let count: u64 = counts.iter().sum();
            row.iter()
                .map(|e| if count > 0 { e / count as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(EvalReport {
        num_samples: n,
        accuracy: if n > 0 { correct as f64 / n as f64 } else { 0.0 },
        confusion: tally.confusion,
        energy_distribution,
        mean_correct_energy: if n > 0 { tally.correct_energy / n as f64 } else { 0.0 },
    })
}

/// Output-versus-input intensity error of an imaging network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingReport {
    pub mean_mse: f64,
    pub per_sample_mse: Vec<f64>,
}

pub fn evaluate_imaging(model: &D2nnModel, dataset: &dyn SampleSource) -> Result<ImagingReport> {
    model.grid().ensure_same(&dataset.grid())?;
    let per_sample_mse = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let sample = dataset.sample(i)?;
            let out = forward_output(model, &sample.input)?.intensity();
            Ok(loss_image_mse(&out, &sample.input.intensity())?.loss)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_mse = if per_sample_mse.is_empty() {
        0.0
    } else {
        per_sample_mse.iter().sum::<f64>() / per_sample_mse.len() as f64
    };
    Ok(ImagingReport {
        mean_mse,
        per_sample_mse,
    })
}
