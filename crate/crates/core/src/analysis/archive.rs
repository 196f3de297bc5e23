//! Binary model container.
//!
//! Layout: `"D2NN"`, u32 version, u64 metadata length, UTF-8 JSON metadata,
//! then per layer the phase and amplitude arrays as little-endian f64 in
//! row-major order, then a u64 checksum (first 8 bytes of SHA-256 over all
//! preceding bytes). Integers are little-endian.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{D2nnError, Result};
use crate::optics::{D2nnModel, DiffractiveLayer, GridSpec, KernelKind};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"D2NN";
pub const ARCHIVE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A model plus free-form provenance (config, history, seeds).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub model: D2nnModel,
    pub provenance: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    grid: GridSpec,
    wavelength: f64,
    kernel: KernelKind,
    input_gap: f64,
    gaps_after: Vec<f64>,
    num_layers: usize,
    provenance: serde_json::Value,
}

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn encode_model(archive: &ModelArchive) -> Result<Vec<u8>> {
    let model = &archive.model;
    let meta = Metadata {
        grid: *model.grid(),
        wavelength: model.grid().wavelength,
        kernel: model.kind(),
        input_gap: model.input_gap(),
        gaps_after: model.layers().iter().map(|l| l.gap_after()).collect(),
        num_layers: model.num_layers(),
        provenance: archive.provenance.clone(),
    };
    let json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + 16 * model.total_neurons() + 8);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend(ARCHIVE_VERSION.to_le_bytes());
    out.extend((json.len() as u64).to_le_bytes());
    out.extend(json);
    for layer in model.layers() {
        for array in [layer.phase(), layer.amplitude()] {
            out.extend(array.iter().flat_map(|v| v.to_le_bytes()));
        }
    }
    out.extend(checksum(&out).to_le_bytes());
    Ok(out)
}

fn truncated(needed: usize, available: usize) -> D2nnError {
    D2nnError::Truncated { needed, available }
}

fn verify_checksum(bytes: &[u8]) -> Result<()> {
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("tail has 8 bytes"));
    let computed = checksum(body);
    if stored != computed {
        return Err(D2nnError::ChecksumMismatch { stored, computed });
    }
    Ok(())
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelArchive> {
    if bytes.len() < 4 {
        return Err(truncated(4, bytes.len()));
    }
    if &bytes[..4] != ARCHIVE_MAGIC {
        return Err(D2nnError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN, bytes.len()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != ARCHIVE_VERSION {
        return Err(D2nnError::UnsupportedVersion(version));
    }
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let meta_end = usize::try_from(meta_len)
        .ok()
        .and_then(|m| m.checked_add(HEADER_LEN))
        .ok_or_else(|| D2nnError::MalformedArchive(format!("metadata length {meta_len}")))?;
    if bytes.len() < meta_end + 8 {
        return Err(truncated(meta_end + 8, bytes.len()));
    }
    let meta: Metadata = match serde_json::from_slice(&bytes[HEADER_LEN..meta_end]) {
        Ok(m) => m,
        Err(e) => {
            verify_checksum(bytes)?;
            return Err(D2nnError::MalformedArchive(format!("metadata: {e}")));
        }
    };
    if meta.gaps_after.len() != meta.num_layers || meta.wavelength.to_bits() != meta.grid.wavelength.to_bits() {
        verify_checksum(bytes)?;
        return Err(D2nnError::MalformedArchive("inconsistent metadata".into()));
    }
    let per_array = meta.grid.nx.checked_mul(meta.grid.ny).and_then(|n| n.checked_mul(8));
    let expected = per_array
        .and_then(|a| a.checked_mul(2 * meta.num_layers))
        .and_then(|a| a.checked_add(meta_end + 8))
        .ok_or_else(|| D2nnError::MalformedArchive("layer arrays too large".into()))?;
    if bytes.len() < expected {
        return Err(truncated(expected, bytes.len()));
    }
    if bytes.len() > expected {
        return Err(D2nnError::TrailingBytes(bytes.len() - expected));
    }
    verify_checksum(bytes)?;

    let grid = meta.grid;
    grid.validate()?;
    let mut arrays = bytes[meta_end..expected - 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut next_array = || -> Result<Array2<f64>> {
        Ok(Array2::from_shape_vec(grid.shape(), arrays.by_ref().take(grid.len()).collect())
            .expect("length checked above"))
    };
    let layers = meta
        .gaps_after
        .iter()
        .map(|&gap| {
            let phase = next_array()?;
            let amplitude = next_array()?;
            DiffractiveLayer::new(grid, phase, amplitude, gap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelArchive {
        model: D2nnModel::new(grid, meta.input_gap, layers, meta.kernel)?,
        provenance: meta.provenance,
    })
}

pub fn save_model(archive: &ModelArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(archive)?).map_err(|e| D2nnError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArchive> {
    let path = path.as_ref();
    decode_model(&std::fs::read(path).map_err(|e| D2nnError::io(path, e))?)
}
