//! Scalar diffraction: fields, propagation kernels, layers and the forward pass.

mod fft;
mod field;
mod grid;
mod kernel;
mod layer;
mod model;
mod propagate;

pub use field::{intensity, ComplexField};
pub use grid::GridSpec;
pub use kernel::{make_as_kernel, make_kernel, make_rs_kernel, rs_point_response, KernelKind, PropagationKernel};
pub use layer::{modulate, wrap_phase, DiffractiveLayer};
pub use model::{
    connection_count, connection_count_within, connections_all_to_all, forward, forward_output,
    D2nnModel, ForwardCache,
};
pub use propagate::{direct_rs_sum, propagate, propagate_adjoint, DIRECT_SUM_LIMIT};
