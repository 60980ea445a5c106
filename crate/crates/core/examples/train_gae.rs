//! Train the graph autoencoder on a synthetic graph and print the loss
//! curves.
//!
//! ```text
//! cargo run --release --example train_gae -- 50
//! ```

use vibgraph::data::{PipelineConfig, SyntheticSpec};
use vibgraph::gae::train;
use vibgraph::pipeline::build_graph_from_series;

fn main() -> vibgraph::Result<()> {
    let epochs = std::env::args().nth(1).map_or(50, |s| s.parse().expect("epoch count"));
    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 1600,
        ..Default::default()
    };
    let cfg = PipelineConfig {
        class_count: 3,
        candidates: vec![4, 8, 16, 32],
        epochs,
        ..Default::default()
    };
    let build = build_graph_from_series(&spec.series(0, "synthetic"), &cfg)?;
    let trained = train(&build.graph, &cfg.gae_config())?;
    let c = &trained.curves;
    for e in (0..c.len()).step_by((c.len() / 10).max(1)) {
        println!(
            "epoch {:>3}: train {:.4} val {:.4} test {:.4} kl {:.4}",
            e + 1,
            c.train_rec[e],
            c.val_rec[e],
            c.test_rec[e],
            c.train_kl[e]
        );
    }
    let h = trained.model.embed(&build.graph)?;
    println!("embedding {} x {}", h.nrows(), h.ncols());
    Ok(())
}
