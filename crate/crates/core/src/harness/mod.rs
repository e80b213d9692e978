//! Reproducible experiment driver: configs in, tables, images and a run
//! record with a content-hashed file manifest out.

mod config;
pub mod phase;
pub mod render;
mod run;

pub use config::{
    EdgeDirection, EngineChoice, ExperimentConfig, ExperimentKind, FieldError, HarnessError, TableFormat, SCHEMA_VERSION,
};
pub use phase::{classify_phase, Phase, PhaseThresholds};
pub use render::{render_snapshot, Image};
pub use run::{run_experiment, sha256_hex, verify_manifest, ManifestEntry, RunRecord, RECORD_FILE};
