//! Train the four base classifiers on noisy blobs, search the mixing
//! weights on out-of-fold probabilities, and compare cross-entropies.
//!
//! ```text
//! cargo run --release --example ensemble
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vibgraph::ensemble::{argmax_rows, fit_ensemble, EnsembleConfig};

fn blobs(seed: u64, per_class: usize) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[0.0, 0.0], [1.5, 0.5], [0.5, 1.5]];
    let mut x = Array2::zeros((3 * per_class, 2));
    let mut y = Vec::new();
    for i in 0..3 * per_class {
        let c = i % 3;
        x[[i, 0]] = centers[c][0] + rng.random_range(-1.0..1.0);
        x[[i, 1]] = centers[c][1] + rng.random_range(-1.0..1.0);
        y.push(c);
    }
    (x, y)
}

fn main() -> vibgraph::Result<()> {
    let (x, y) = blobs(0, 60);
    let cfg = EnsembleConfig::default();
    let model = fit_ensemble(&x, &y, &cfg)?;
    for (member, ce) in model.members.iter().zip(&model.out_of_fold.member_cross_entropy) {
        println!("{:<22} out-of-fold CE {ce:.4}", member.kind());
    }
    println!(
        "weights {:?}, ensemble CE {:.4}",
        model.weights, model.out_of_fold.cross_entropy
    );

    let (xt, yt) = blobs(1, 100);
    let predicted = argmax_rows(&model.predict_proba(&xt)?);
    let correct = predicted.iter().zip(&yt).filter(|(p, t)| p == t).count();
    println!("held-out accuracy {:.3}", correct as f64 / yt.len() as f64);
    Ok(())
}
