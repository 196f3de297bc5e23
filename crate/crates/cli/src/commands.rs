use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use d2nn::analysis::{
    lens_geometry_warnings, load_model, phase_to_heightmap, phase_to_pgm, run_lens_battery, save_model,
    write_confusion_csv, write_energy_csv, write_intensity_pgm, write_json, write_report_json, LensBattery,
    ModelArchive,
};
use d2nn::data::pgm::read_pgm;
use d2nn::data::{encode_with, synth_letter, synth_line_pair, synth_pinhole, Encoding};
use d2nn::optics::{forward_output, ComplexField, D2nnModel, GridSpec};
use d2nn::perturb::{apply_combined, sweep_attenuation, sweep_misalignment, PerturbationSpec};
use d2nn::training::{evaluate, evaluate_imaging, train_with, DetectorLayout, LossKind, SampleSource};
use d2nn::D2nnError;
use serde::Serialize;

use crate::config::{DataConfig, RunConfig};
use crate::datasets;
use crate::error::{CliError, CliResult};

pub const ARCHIVE_NAME: &str = "model.d2nn";

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path).map_err(io_err(path))?))
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// Classification runs write `<stem>_report.json`, `confusion.csv` and
/// `energy.csv`; imaging runs write `<stem>_imaging.json`.
fn write_evaluation(
    model: &D2nnModel,
    config: &RunConfig,
    test: &dyn SampleSource,
    layout: Option<&DetectorLayout>,
    out: &Path,
    stem: &str,
) -> CliResult<()> {
    if test.is_empty() {
        log::warn!("test split is empty; no evaluation written");
        return Ok(());
    }
    match (layout, config.train.loss_kind) {
        (Some(layout), LossKind::SoftmaxCe | LossKind::DetectorMse) => {
            let report = evaluate(model, test, layout)?;
            log::info!(
                "test accuracy {:.4}, correct-detector energy {:.4}",
                report.accuracy,
                report.mean_correct_energy
            );
            write_report_json(&report, out.join(format!("{stem}_report.json")))?;
            write_confusion_csv(&report, out.join("confusion.csv"))?;
            write_energy_csv(&report, out.join("energy.csv"))?;
        }
        _ => {
            let report = evaluate_imaging(model, test)?;
            log::info!("test image MSE {:.6e}", report.mean_mse);
            write_json(&report, out.join(format!("{stem}_imaging.json")))?;
        }
    }
    Ok(())
}

pub fn train(config_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let config = RunConfig::load(config_path)?;
    let out = out.unwrap_or_else(|| config.output_dir.clone());
    let layout = config.layout()?;
    let data = datasets::load(&config)?;
    let mut model = config.build_model()?;
    create_dir(&out)?;

    let metrics_path = out.join("metrics.jsonl");
    let mut metrics = File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    let archive_path = out.join(ARCHIVE_NAME);
    let provenance = |history: &[d2nn::training::EpochRecord]| {
        serde_json::json!({ "config": &config, "history": history })
    };
    let mut history_so_far = Vec::new();
    let history = train_with(
        &mut model,
        data.train.as_dyn(),
        data.validation.as_ref().map(|v| v.as_dyn()),
        layout.as_ref(),
        &config.train,
        |m, records| {
            for r in records {
                let line = serde_json::to_string(r)?;
                writeln!(metrics, "{line}").map_err(|e| D2nnError::Io {
                    path: metrics_path.display().to_string(),
                    source: e,
                })?;
            }
            history_so_far.extend_from_slice(records);
            // Checkpoint so an interrupted run keeps its last finished epoch.
            save_model(
                &ModelArchive {
                    model: m.clone(),
                    provenance: provenance(&history_so_far),
                },
                &archive_path,
            )
        },
    )?;
    save_model(
        &ModelArchive {
            model: model.clone(),
            provenance: provenance(&history),
        },
        &archive_path,
    )?;
    write_evaluation(&model, &config, data.test.as_dyn(), layout.as_ref(), &out, "final")
}

pub fn eval(config_path: &Path, archive: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<()> {
    let config = RunConfig::load(config_path)?;
    let archive = archive.unwrap_or_else(|| config.output_dir.join(ARCHIVE_NAME));
    let model = load_model(&archive)?.model;
    config.grid.ensure_same(model.grid())?;
    let out = out.unwrap_or_else(|| config.output_dir.join("eval"));
    let layout = config.layout()?;
    let data = datasets::load(&config)?;
    create_dir(&out)?;
    write_evaluation(&model, &config, data.test.as_dyn(), layout.as_ref(), &out, "eval")
}

/// What to feed the network in `infer`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Zero,
    Pinhole(f64),
    LinePair(f64),
    Letter(char, f64),
    MnistTest(usize),
    Pgm(PathBuf),
}

impl std::str::FromStr for InputSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["zero"] => Ok(InputSpec::Zero),
            ["pinhole", d] => Ok(InputSpec::Pinhole(num(d)?)),
            ["line_pair", w] => Ok(InputSpec::LinePair(num(w)?)),
            ["letter", c, size] if c.chars().count() == 1 => {
                Ok(InputSpec::Letter(c.chars().next().unwrap_or('?'), num(size)?))
            }
            ["mnist_test", i] => Ok(InputSpec::MnistTest(i.parse().map_err(|e| format!("{i:?}: {e}"))?)),
            _ if s.ends_with(".pgm") => Ok(InputSpec::Pgm(PathBuf::from(s))),
            _ => Err(format!(
                "unknown input {s:?}; expected zero, pinhole:<m>, line_pair:<m>, letter:<C>:<m>, mnist_test:<i> or a .pgm path"
            )),
        }
    }
}

#[derive(Serialize)]
struct InferSummary {
    total_energy: f64,
    signals: Vec<f64>,
    energy_fractions: Vec<f64>,
    predicted: Option<usize>,
    label: Option<usize>,
}

fn object_extent(config: Option<&RunConfig>, grid: &GridSpec, override_extent: Option<f64>) -> f64 {
    override_extent
        .or(config.and_then(|c| match &c.data {
            DataConfig::Mnist { object_extent, .. } | DataConfig::ImageDir { object_extent, .. } => {
                Some(*object_extent)
            }
            DataConfig::TwoSpot { .. } => None,
        }))
        .unwrap_or(grid.nx.min(grid.ny) as f64 * grid.pitch)
}

fn infer_input(
    spec: &InputSpec,
    grid: GridSpec,
    config: Option<&RunConfig>,
    extent: f64,
) -> CliResult<(ComplexField, Option<usize>)> {
    let encoding = |binarize| Encoding {
        object_extent: extent,
        binarize,
    };
    Ok(match spec {
        InputSpec::Zero => (ComplexField::zeros(grid), None),
        InputSpec::Pinhole(d) => (synth_pinhole(grid, *d)?, None),
        InputSpec::LinePair(w) => (synth_line_pair(grid, *w, *w)?, None),
        InputSpec::Letter(c, size) => (synth_letter(grid, *c, *size)?, None),
        InputSpec::Pgm(path) => (encode_with(&read_pgm(path)?.to_image()?, grid, &encoding(false))?, None),
        InputSpec::MnistTest(index) => {
            let Some(DataConfig::Mnist { dir, binarize, .. }) = config.map(|c| &c.data) else {
                return Err(CliError::Config("mnist_test inputs need --config with an MNIST data source".into()));
            };
            let mnist = d2nn::data::load_mnist(dir)?;
            let image = mnist
                .test
                .get(*index)
                .ok_or_else(|| CliError::Config(format!("MNIST test index {index} out of range")))?;
            (encode_with(image, grid, &encoding(*binarize))?, image.label())
        }
    })
}

pub fn infer(
    archive: &Path,
    input: &InputSpec,
    out: &Path,
    config_path: Option<&Path>,
    extent: Option<f64>,
) -> CliResult<()> {
    let model = load_model(archive)?.model;
    let config = config_path.map(RunConfig::load).transpose()?;
    if let Some(c) = &config {
        c.grid.ensure_same(model.grid())?;
    }
    let grid = *model.grid();
    let extent = object_extent(config.as_ref(), &grid, extent);
    let (field, label) = infer_input(input, grid, config.as_ref(), extent)?;
    let output = forward_output(&model, &field)?;
    let intensity = output.intensity();
    let layout = match &config {
        Some(c) => c.layout()?,
        None => Some(DetectorLayout::default_ten(&grid)),
    };
    let total_energy = output.energy();
    let (signals, predicted) = match &layout {
        Some(l) => {
            let s = l.masks(&grid)?.signals(&intensity)?;
            let p = (total_energy > 0.0).then(|| d2nn::training::argmax(&s));
            (s, p)
        }
        None => (Vec::new(), None),
    };
    let energy_fractions = signals
        .iter()
        .map(|s| if total_energy > 0.0 { s / total_energy } else { 0.0 })
        .collect();
    create_dir(out)?;
    write_intensity_pgm(&field.intensity(), out.join("input.pgm"))?;
    write_intensity_pgm(&intensity, out.join("output.pgm"))?;
    Ok(write_json(
        &InferSummary {
            total_energy,
            signals,
            energy_fractions,
            predicted,
            label,
        },
        out.join("signals.json"),
    )?)
}

#[derive(Serialize)]
struct LensOutput<'a> {
    warnings: &'a [String],
    #[serde(flatten)]
    report: &'a d2nn::analysis::LensReport,
}

pub fn lens_battery(archive: &Path, out: &Path, config_path: Option<&Path>) -> CliResult<()> {
    let model = load_model(archive)?.model;
    let battery = match config_path {
        Some(p) => RunConfig::load(p)?.lens,
        None => LensBattery::default(),
    };
    let warnings = lens_geometry_warnings(&model);
    for w in &warnings {
        log::warn!("archive is not lens-shaped: {w}");
    }
    let (report, planes) = run_lens_battery(&model, &battery)?;
    create_dir(out)?;
    write_json(
        &LensOutput {
            warnings: &warnings,
            report: &report,
        },
        out.join("lens_report.json"),
    )?;
    write_rows(&report.psf, &out.join("psf.csv"))?;
    write_rows(&report.line_pairs, &out.join("line_pairs.csv"))?;
    write_rows(&report.defocus, &out.join("defocus.csv"))?;
    write_rows(&report.letters, &out.join("letters.csv"))?;
    for (name, plane) in &planes {
        write_intensity_pgm(plane, out.join(format!("{name}.pgm")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CombinedRow {
    trial: usize,
    rng_seed: u64,
    accuracy: f64,
}

pub fn sweep(config_path: &Path, archive: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<()> {
    let config = RunConfig::load(config_path)?;
    let archive = archive.unwrap_or_else(|| config.output_dir.join(ARCHIVE_NAME));
    let model = load_model(&archive)?.model;
    config.grid.ensure_same(model.grid())?;
    let layout = config
        .layout()?
        .ok_or_else(|| CliError::Config("sweeps need a detector layout".into()))?;
    let out = out.unwrap_or_else(|| config.output_dir.join("sweep"));
    let data = datasets::load(&config)?;
    let test = data.test.as_dyn();
    let spec = &config.perturbation;
    create_dir(&out)?;

    let table = sweep_misalignment(&model, test, &layout, &config.sweep.bounds, config.sweep.trials, spec.rng_seed)?;
    let mut w = csv_writer(&out.join("misalignment.csv"))?;
    let mut header = vec!["bound".to_string(), "mean_accuracy".into(), "std_accuracy".into()];
    header.extend((0..config.sweep.trials).map(|k| format!("trial_{k}")));
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.bound.to_string(), row.mean_accuracy.to_string(), row.std_accuracy.to_string()];
        rec.extend(row.trial_accuracies.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&out))?;

    let attenuation = sweep_attenuation(&model, test, &layout, &config.sweep.power_transmissions)?;
    write_rows(&attenuation, &out.join("attenuation.csv"))?;

    let combined = (0..config.sweep.combined_trials)
        .map(|trial| {
            let rng_seed = spec.rng_seed.wrapping_add(trial as u64);
            let perturbed = apply_combined(&model, &PerturbationSpec { rng_seed, ..spec.clone() })?;
            Ok(CombinedRow {
                trial,
                rng_seed,
                accuracy: evaluate(&perturbed, test, &layout)?.accuracy,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_rows(&combined, &out.join("combined.csv"))?;
    write_json(
        &serde_json::json!({
            "misalignment": table,
            "attenuation": attenuation,
            "combined": combined,
            "perturbation": spec,
        }),
        out.join("sweep.json"),
    )?;
    Ok(())
}

/// Sidecar describing a raw height-map array.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct HeightSidecar {
    pub file: String,
    pub dtype: String,
    /// `[rows, columns]`.
    pub shape: [usize; 2],
    pub grid: GridSpec,
    pub base_thickness: f64,
    pub refractive_index: f64,
    pub wavelength: f64,
    pub max_relief: f64,
}

pub fn export_masks(archive: &Path, refractive_index: f64, base_thickness: f64, out: &Path) -> CliResult<()> {
    if !(refractive_index > 1.0) {
        return Err(CliError::Config(format!("refractive index must exceed 1, got {refractive_index}")));
    }
    let model = load_model(archive)?.model;
    create_dir(out)?;
    for (k, layer) in model.layers().iter().enumerate() {
        let n = k + 1;
        phase_to_pgm(layer.phase()).write(out.join(format!("layer_{n}_phase.pgm")))?;
        let map = phase_to_heightmap(layer, refractive_index, model.grid().wavelength, base_thickness)?;
        let raw_name = format!("layer_{n}_height.f64");
        let raw_path = out.join(&raw_name);
        let bytes: Vec<u8> = map.thickness.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&raw_path, bytes).map_err(io_err(&raw_path))?;
        write_json(
            &HeightSidecar {
                file: raw_name,
                dtype: "f64-le".into(),
                shape: [map.grid.ny, map.grid.nx],
                grid: map.grid,
                base_thickness,
                refractive_index,
                wavelength: map.wavelength,
                max_relief: map.max_relief(),
            },
            out.join(format!("layer_{n}_height.json")),
        )?;
    }
    Ok(())
}
