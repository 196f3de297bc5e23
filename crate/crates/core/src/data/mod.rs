//! Dataset ingestion, amplitude encoding and synthetic test objects.

mod encode;
mod idx;
mod images;
pub mod pgm;
mod synth;

pub use encode::{encode_amplitude, encode_with, EncodedImages, Encoding};
pub use idx::{load_mnist, parse_idx_images, parse_idx_labels, MnistData, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
pub use images::{load_image_dir, load_images, LabeledImage, LoadPolicy};
pub use synth::{line_pair_columns, synth_letter, synth_line_pair, synth_line_pair_bars, synth_pinhole, two_spot_task, LETTERS};
