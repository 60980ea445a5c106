//! Score candidate window sizes by normalized entropy and cut the series at
//! the winner.
//!
//! ```text
//! cargo run --release --example window_selection
//! ```

use vibgraph::data::SyntheticSpec;
use vibgraph::segmentation::{segment, select_window, BinRule, Stride};

fn main() -> vibgraph::Result<()> {
    let spec = SyntheticSpec {
        periods: vec![4.0, 8.0, 16.0],
        samples_per_class: 1600,
        ..Default::default()
    };
    let series = spec.series(0, "synthetic");
    let selection = select_window(series.samples(), &[4, 8, 16, 32], Stride::Window, BinRule::SqrtWindow)?;
    print!("{}", selection.to_csv());
    println!("w* = {}", selection.w_star);

    let w = selection.w_star;
    let segments = segment(&series, w, Stride::HalfWindow.step_for(w))?;
    let mut per_class = [0usize; 3];
    for s in &segments {
        per_class[s.label] += 1;
    }
    println!("{} segments of width {w}, per class {per_class:?}", segments.len());
    Ok(())
}
