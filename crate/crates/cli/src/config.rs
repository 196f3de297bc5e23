//! Declarative run configuration, one TOML document per experiment.

use std::path::{Path, PathBuf};

use d2nn::analysis::LensBattery;
use d2nn::data::LoadPolicy;
use d2nn::optics::{D2nnModel, GridSpec, KernelKind};
use d2nn::perturb::PerturbationSpec;
use d2nn::training::{DetectorLayout, DetectorRegion, LossKind, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths resolve against the directory holding the config file.
    pub output_dir: PathBuf,
    pub grid: GridSpec,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub detectors: DetectorConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub lens: LensBattery,
    #[serde(default)]
    pub fabrication: FabricationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Phases uniform in [0, 2π).
    #[default]
    Random,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub kernel: KernelKind,
    /// Input plane to the first layer, meters.
    pub input_gap: f64,
    /// One entry per layer: distance to the next layer or, for the last, to the output plane.
    pub gaps_after: Vec<f64>,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub init_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    /// Ten squares, 10% of the plane wide, in rows of 3, 4 and 3.
    #[default]
    Ten,
    Custom { regions: Vec<DetectorRegion> },
    /// Imaging runs read no detectors.
    None,
}

fn default_policy() -> LoadPolicy {
    LoadPolicy::Abort
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// The four uncompressed IDX files. Training uses the first `train_count`
    /// training images, validation the next `validation_count`, testing the
    /// first `test_count` test images.
    Mnist {
        dir: PathBuf,
        object_extent: f64,
        #[serde(default)]
        binarize: bool,
        train_count: usize,
        validation_count: usize,
        test_count: usize,
    },
    /// Every PGM of `dir` in file-name order; the last `test_count` are held out.
    ImageDir {
        dir: PathBuf,
        object_extent: f64,
        #[serde(default)]
        binarize: bool,
        #[serde(default = "default_policy")]
        load_policy: LoadPolicy,
        #[serde(default)]
        test_count: usize,
    },
    /// Gaussian spots left (class 0) or right (class 1) of center.
    TwoSpot {
        train_count: usize,
        test_count: usize,
        offset: f64,
        jitter: f64,
        spot: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Misalignment bounds, meters.
    pub bounds: Vec<f64>,
    pub trials: usize,
    pub power_transmissions: Vec<f64>,
    /// Trials of the combined model (misalignment, attenuation and phase noise from `[perturbation]`).
    pub combined_trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bounds: vec![0.0, 0.05e-3, 0.1e-3, 0.2e-3],
            trials: 10,
            power_transmissions: vec![1.0, 0.7, 0.49],
            combined_trials: 10,
        }
    }
}

/// Material used when exporting height maps. There is no default index:
/// it depends on the printing material and frequency.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricationConfig {
    pub refractive_index: Option<f64>,
    pub base_thickness: f64,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads, parses and validates; relative paths are made absolute.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        match &mut self.data {
            DataConfig::Mnist { dir, .. } | DataConfig::ImageDir { dir, .. } => fix(dir),
            DataConfig::TwoSpot { .. } => {}
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.grid.validate()?;
        if self.model.gaps_after.is_empty() {
            return Err(invalid("model.gaps_after needs at least one layer"));
        }
        if std::iter::once(&self.model.input_gap)
            .chain(&self.model.gaps_after)
            .any(|g| !(*g > 0.0 && g.is_finite()))
        {
            return Err(invalid("every gap must be positive"));
        }
        self.train.validate()?;
        self.perturbation.validate()?;
        if let Some(layout) = self.layout()? {
            layout.masks(&self.grid)?;
        } else if self.train.loss_kind != LossKind::ImageMse {
            return Err(invalid("classification losses need a detector layout"));
        }
        if self.sweep.trials == 0 {
            return Err(invalid("sweep.trials must be at least 1"));
        }
        if let Some(n) = self.fabrication.refractive_index {
            if !(n > 1.0) {
                return Err(invalid("fabrication.refractive_index must exceed 1"));
            }
        }
        let plane = self.grid.nx.min(self.grid.ny) as f64 * self.grid.pitch;
        match &self.data {
            DataConfig::Mnist { object_extent, .. } | DataConfig::ImageDir { object_extent, .. } => {
                if !(*object_extent > 0.0 && *object_extent <= plane * (1.0 + 1e-9)) {
                    return Err(invalid(format!(
                        "object_extent {object_extent} m must be positive and fit the {plane} m plane"
                    )));
                }
            }
            DataConfig::TwoSpot { .. } => {}
        }
        Ok(())
    }

    pub fn layout(&self) -> CliResult<Option<DetectorLayout>> {
        Ok(match &self.detectors {
            DetectorConfig::Ten => Some(DetectorLayout::default_ten(&self.grid)),
            DetectorConfig::Custom { regions } => Some(DetectorLayout::new(regions.clone())?),
            DetectorConfig::None => None,
        })
    }

    /// Freshly initialized model, deterministic under `model.init_seed`.
    pub fn build_model(&self) -> CliResult<D2nnModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.model.init_seed);
        let rng = match self.model.init {
            InitKind::Random => Some(&mut rng),
            InitKind::Flat => None,
        };
        Ok(D2nnModel::with_gaps(
            self.grid,
            self.model.input_gap,
            &self.model.gaps_after,
            self.model.kernel,
            rng,
        )?)
    }
}
