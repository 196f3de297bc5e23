//! Diffractive deep neural networks: coherent scalar propagation through
//! stacked phase-only layers, adjoint-gradient training, robustness studies
//! and fabrication export.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod optics;
pub mod perturb;
pub mod training;

pub use error::{D2nnError, Result};
