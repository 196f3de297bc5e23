use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::data::pgm::Pgm;
use crate::error::{D2nnError, Result};
use crate::training::EvalReport;

/// Min-max normalization to 16-bit samples. A constant input (including
/// all zeros) has no range and maps to all zeros.
pub fn intensity_to_pgm(intensity: &Array2<f64>) -> Result<Pgm> {
    if intensity.iter().any(|v| !v.is_finite()) {
        return Err(D2nnError::InvalidArgument("cannot render non-finite intensity".into()));
    }
    let lo = intensity.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = intensity.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let samples = intensity
        .iter()
        .map(|&v| {
            if range > 0.0 {
                ((v - lo) / range * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    let (height, width) = intensity.dim();
    Ok(Pgm {
        width,
        height,
        maxval: 65535,
        samples,
    })
}

/// Phases in `[0, 2π)` mapped linearly to the full 16-bit range.
pub fn phase_to_pgm(phase: &Array2<f64>) -> Pgm {
    let (height, width) = phase.dim();
    Pgm {
        width,
        height,
        maxval: 65535,
        samples: phase
            .iter()
            .map(|&p| (p.rem_euclid(TAU) / TAU * 65535.0).round().min(65535.0) as u16)
            .collect(),
    }
}

pub fn write_intensity_pgm(intensity: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    intensity_to_pgm(intensity)?.write(path)
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| D2nnError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| D2nnError::io(path, e))
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    create(path)?.write_all(&out).map_err(|e| D2nnError::io(path, e))
}

fn write_matrix<T: ToString>(rows: &[Vec<T>], path: &Path) -> Result<()> {
    let k = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<String> = std::iter::once("true_class".to_string())
        .chain((0..k).map(|c| format!("detector_{c}")))
        .collect();
    w.write_record(&header)?;
    for (c, row) in rows.iter().enumerate() {
        w.write_record(std::iter::once(c.to_string()).chain(row.iter().map(T::to_string)))?;
    }
    w.flush().map_err(|e| D2nnError::io(path, e))
}

/// Counts, `confusion[true][predicted]`.
pub fn write_confusion_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(&report.confusion, path.as_ref())
}

/// Mean energy fraction per detector, one row per true class.
pub fn write_energy_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(&report.energy_distribution, path.as_ref())
}

/// JSON summary of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary<'a> {
    pub num_samples: usize,
    pub accuracy: f64,
    pub mean_correct_energy: f64,
    pub class_counts: Vec<u64>,
    pub correct_energy_per_class: Vec<f64>,
    pub confusion: &'a [Vec<u64>],
    pub energy_distribution: &'a [Vec<f64>],
}

impl<'a> From<&'a EvalReport> for ReportSummary<'a> {
    fn from(r: &'a EvalReport) -> Self {
        ReportSummary {
            num_samples: r.num_samples,
            accuracy: r.accuracy,
            mean_correct_energy: r.mean_correct_energy,
            class_counts: r.class_counts(),
            correct_energy_per_class: r.correct_energy_per_class(),
            confusion: &r.confusion,
            energy_distribution: &r.energy_distribution,
        }
    }
}

pub fn write_report_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(&ReportSummary::from(report), path)
}
