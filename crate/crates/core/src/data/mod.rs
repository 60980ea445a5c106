//! Dataset ingestion, preprocessing, and pipeline configuration.

pub mod config;
pub mod io;
pub mod preprocess;
pub mod synthetic;

pub use config::PipelineConfig;
pub use io::{load_recordings, read_manifest, ManifestEntry, RawRecording};
pub use preprocess::{assemble_dataset, block_reduce, Reducer, DEFAULT_BLOCK};
pub use synthetic::{write_synthetic_recordings, SyntheticSpec};
