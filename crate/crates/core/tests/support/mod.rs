use std::path::Path;

use vibgraph::data::{write_synthetic_recordings, PipelineConfig, Reducer, SyntheticSpec};

/// Two-load synthetic dataset in `dir` and a config small enough to train
/// in seconds.
pub fn small_dataset(dir: &Path) -> PipelineConfig {
    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 480,
        ..Default::default()
    };
    let manifest = write_synthetic_recordings(dir, &spec, &["1hp", "2hp"], 0).unwrap();
    PipelineConfig {
        manifest: Some(manifest.display().to_string()),
        class_count: 3,
        block: 1,
        reducer: Reducer::First,
        candidates: vec![4, 8, 16, 32],
        epochs: 3,
        hidden_dim: 16,
        gat_heads: 2,
        transformer_heads: 2,
        decoder_dim: 16,
        rf_trees: 10,
        boost_rounds: 10,
        mlp_epochs: 20,
        cv_folds: 3,
        ..Default::default()
    }
}
