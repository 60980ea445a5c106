//! Train one model per load of a synthetic dataset and score every model on
//! every load.
//!
//! ```text
//! cargo run --release --example cross_load -- /tmp/cross
//! ```

use std::path::PathBuf;

use vibgraph::data::{write_synthetic_recordings, PipelineConfig, Reducer, SyntheticSpec};
use vibgraph::pipeline::{cross_eval, cross_eval_datasets};

fn main() -> vibgraph::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "cross_load".into()));
    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 1600,
        ..Default::default()
    };
    let manifest = write_synthetic_recordings(&out.join("data"), &spec, &["1hp", "2hp", "3hp"], 0)?;
    let cfg = PipelineConfig {
        manifest: Some(manifest.display().to_string()),
        class_count: 3,
        block: 1,
        reducer: Reducer::First,
        candidates: vec![4, 8, 16, 32],
        epochs: 20,
        ..Default::default()
    };
    let result = cross_eval(&cross_eval_datasets(&[cfg])?, &out.join("run"))?;
    for r in &result.reports {
        println!(
            "{} -> {} ({}): macro F1 {:.3}",
            r.train_source, r.test_source, r.subset, r.macro_f1
        );
    }
    println!("summary in {}", out.join("run/summary.md").display());
    Ok(())
}
