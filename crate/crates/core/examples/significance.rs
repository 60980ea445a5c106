//! Paired t-test and Wilcoxon signed-rank test on two per-class F1 vectors.
//!
//! ```text
//! cargo run --release --example significance
//! ```

use vibgraph::stats::{f1_summary, paired_ttest, wilcoxon_signed_rank, Alternative};

fn main() -> vibgraph::Result<()> {
    let ours = [1.00, 1.00, 0.99, 0.99, 1.00, 1.00, 1.00, 0.98, 0.99, 1.00];
    let baseline = [0.95, 0.94, 0.89, 1.00, 1.00, 0.97, 0.97, 1.00, 0.71, 1.00];

    for (vector, name) in [(&ours[..], "ours"), (&baseline[..], "baseline")] {
        let (mean, sd) = f1_summary(&[vector.to_vec()])?;
        println!("{name:<9} mean F1 {mean:.3} +- {sd:.3}");
    }
    for alt in [Alternative::TwoSided, Alternative::Greater] {
        let t = paired_ttest(&ours, &baseline, alt)?;
        let w = wilcoxon_signed_rank(&ours, &baseline, alt)?;
        println!(
            "{alt:?}: t = {:.3} (p {:.4}), W+ = {} W- = {} (exact p {:.4})",
            t.statistic,
            t.p_value,
            w.w_plus.unwrap(),
            w.w_minus.unwrap(),
            w.p_value
        );
    }
    Ok(())
}
