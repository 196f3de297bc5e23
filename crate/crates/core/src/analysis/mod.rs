//! Metrics, fabrication height maps, model archives and file output.

mod archive;
mod export;
mod heightmap;
mod lens;
mod metrics;

pub use archive::{decode_model, encode_model, load_model, save_model, ModelArchive, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use export::{
    intensity_to_pgm, phase_to_pgm, write_confusion_csv, write_energy_csv, write_intensity_pgm, write_json,
    write_jsonl, write_report_json, ReportSummary,
};
pub use heightmap::{heightmap_to_phase, phase_to_heightmap, HeightMap};
pub use lens::{
    lens_geometry_warnings, run_lens_battery, DefocusRow, LensBattery, LensReport, LetterRow, LinePairRow,
    PsfRow,
};
pub use metrics::{measure_fwhm, resolved, Axis, Resolution, RESOLVED_CONTRAST};
