use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::encode::{encode_with, Encoding};
use super::pgm::parse_pgm;
use crate::error::{D2nnError, Result};
use crate::optics::{ComplexField, GridSpec};

/// Grayscale image with values in `[0, 1]` and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pixels: Array2<f32>,
    label: Option<usize>,
}

impl LabeledImage {
    pub fn new(pixels: Array2<f32>, label: Option<usize>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(D2nnError::InvalidArgument("image has no pixels".into()));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(D2nnError::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(LabeledImage { pixels, label })
    }

    pub fn pixels(&self) -> &Array2<f32> {
        &self.pixels
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }
}

/// What to do with a file that cannot be read or parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadPolicy {
    #[default]
    Abort,
    SkipWithWarning,
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| D2nnError::io(dir, e))? {
        let entry = entry.map_err(|e| D2nnError::io(dir, e))?;
        let path = entry.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn load_one(path: &Path) -> Result<LabeledImage> {
    let bytes = std::fs::read(path).map_err(|e| D2nnError::io(path, e))?;
    parse_pgm(&bytes)?.to_image()
}

/// Reads every PGM in `dir` in lexicographic file-name order.
pub fn load_images(dir: impl AsRef<Path>, policy: LoadPolicy) -> Result<Vec<(PathBuf, LabeledImage)>> {
    let mut out = Vec::new();
    for path in sorted_files(dir.as_ref())? {
        match load_one(&path) {
            Ok(img) => out.push((path, img)),
            Err(e) if policy == LoadPolicy::SkipWithWarning => {
                log::warn!("skipping {}: {e}", path.display());
            }
            Err(e) => {
                return Err(match e {
                    D2nnError::MalformedPgm(msg) => {
                        D2nnError::MalformedPgm(format!("{}: {msg}", path.display()))
                    }
                    other => other,
                })
            }
        }
    }
    Ok(out)
}

/// Reads and encodes every PGM in `dir`.
pub fn load_image_dir(
    dir: impl AsRef<Path>,
    grid: GridSpec,
    object_extent: f64,
    policy: LoadPolicy,
) -> Result<Vec<ComplexField>> {
    let encoding = Encoding {
        object_extent,
        binarize: false,
    };
    load_images(dir, policy)?
        .iter()
        .map(|(_, img)| encode_with(img, grid, &encoding))
        .collect()
}
