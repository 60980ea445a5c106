//! From raw samples to a similarity graph: DTW between two short sequences,
//! then the full graph build on a synthetic series.
//!
//! ```text
//! cargo run --release --example dtw_graph
//! ```

use vibgraph::data::{PipelineConfig, SyntheticSpec};
use vibgraph::graph::{dtw_distance, similarity};
use vibgraph::pipeline::build_graph_from_series;

fn main() -> vibgraph::Result<()> {
    let a = [0.0, 1.0, 2.0, 1.0, 0.0];
    let b = [0.0, 0.0, 1.0, 2.0, 1.0, 0.0];
    let d = dtw_distance(&a, &b)?;
    println!("dtw({a:?}, {b:?}) = {d}, similarity {:.3}", similarity(d)?);

    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 1600,
        ..Default::default()
    };
    let cfg = PipelineConfig {
        class_count: 3,
        candidates: vec![4, 8, 16, 32],
        ..Default::default()
    };
    let build = build_graph_from_series(&spec.series(0, "synthetic"), &cfg)?;
    let g = &build.graph;
    let same = g.edges.iter().filter(|e| g.labels[e.0] == g.labels[e.1]).count();
    println!(
        "w*={} nodes={} edges={} theta={:.4} same-class edges {:.1}%",
        g.meta.w_star,
        g.node_count(),
        g.edges.len(),
        g.meta.theta,
        100.0 * same as f64 / g.edges.len() as f64
    );
    let degrees = g.degrees();
    println!(
        "degree min {} max {}",
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    );
    Ok(())
}
