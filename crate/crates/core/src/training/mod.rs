//! Losses, adjoint gradients, the Adam optimizer, the training loop and evaluation.

pub mod adam;
pub mod backward;
pub mod detector;
pub mod evaluate;
pub mod loss;
pub mod source;
pub mod train;

pub use adam::{adam_step, Adam, AdamState};
pub use backward::{backward, LayerGradients};
pub use detector::{argmax, detector_signals, DetectorLayout, DetectorMasks, DetectorRegion};
pub use evaluate::{evaluate, evaluate_imaging, EvalReport, ImagingReport};
pub use loss::{
    intensity_grad_to_field, loss_detector_mse, loss_image_mse, loss_softmax_ce,
    softmax_ce_on_intensity, IntensityLoss, LossKind, SignalLoss,
};
pub use source::{FieldSet, Sample, SampleSource, Subset};
pub use train::{sample_gradient, train, train_with, EpochRecord, Objective, SampleOutcome, Split, TrainConfig};
