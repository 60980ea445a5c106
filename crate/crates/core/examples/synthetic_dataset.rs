//! Write a three-load synthetic sinusoid dataset and a matching config.
//!
//! ```text
//! cargo run --release --example synthetic_dataset -- /tmp/syn
//! cargo run --release --bin vibgraph -- build-graph --config /tmp/syn/config.toml --load 1hp --out /tmp/syn/1hp.json
//! ```

use std::path::PathBuf;

use vibgraph::data::{write_synthetic_recordings, PipelineConfig, Reducer, SyntheticSpec};

fn main() -> vibgraph::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 1600,
        ..Default::default()
    };
    let manifest = write_synthetic_recordings(&dir, &spec, &["1hp", "2hp", "3hp"], 0)?;

    // the recordings are already at the analysis rate, so no block reduction
    let cfg = PipelineConfig {
        manifest: Some(manifest.display().to_string()),
        class_count: spec.class_count(),
        block: 1,
        reducer: Reducer::First,
        candidates: vec![4, 8, 16, 32],
        ..Default::default()
    };
    let toml = toml::to_string(&cfg).expect("config serializes");
    std::fs::write(dir.join("config.toml"), toml).map_err(|e| vibgraph::Error::io(&dir, e))?;
    println!("wrote {} and {}", manifest.display(), dir.join("config.toml").display());
    Ok(())
}
