use std::io;

use thiserror::Error;

use crate::optics::GridSpec;

pub type Result<T, E = D2nnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum D2nnError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected:?}, got {actual:?}")]
    GridMismatch { expected: GridSpec, actual: GridSpec },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "kernel undersampled: phase step {phase_step:.3} rad between adjacent samples exceeds pi \
         (dz = {dz} m, pitch = {pitch} m)"
    )]
    Undersampled { dz: f64, pitch: f64, phase_step: f64 },

    #[error("grid {nx}x{ny} exceeds the direct-summation limit of 64x64")]
    DirectSumTooLarge { nx: usize, ny: usize },

    #[error("forward cache is stale: the model changed after the forward pass")]
    StaleCache,

    #[error("zero total energy at the output plane")]
    ZeroEnergy,

    #[error("detector region {0} lies outside the output plane")]
    RegionOutsidePlane(usize),

    #[error("invalid detector layout: {0}")]
    InvalidLayout(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("wrong magic number: expected {expected:#010x}, got {actual:#010x}")]
    WrongMagic { expected: u32, actual: u32 },

    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("label {0} out of range 0..=9")]
    LabelOutOfRange(u8),

    #[error("malformed PGM: {0}")]
    MalformedPgm(String),

    #[error("bad archive magic")]
    BadMagic,

    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),

    #[error("archive checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("malformed archive: {0}")]
    MalformedArchive(String),

    #[error("no half-maximum crossing found: {0}")]
    NoCrossing(String),

    #[error("degenerate cross-section: {0}")]
    DegenerateProfile(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl D2nnError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        D2nnError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by bad input or numerics.
    pub fn is_io(&self) -> bool {
        matches!(self, D2nnError::Io { .. })
    }

    /// True for errors raised while computing (divergence, non-finite values).
    pub fn is_compute(&self) -> bool {
        matches!(self, D2nnError::NonFiniteLoss { .. } | D2nnError::ZeroEnergy)
    }
}
