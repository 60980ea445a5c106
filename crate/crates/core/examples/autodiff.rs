//! Fit a two-class logistic regression on the tape, then check its
//! gradients against central differences.
//!
//! ```text
//! cargo run --release --example autodiff
//! ```

use ndarray::{array, Array2};
use vibgraph::autodiff::{grad_check, AdamConfig, AdamState, Matrix, ParamSet, Tape, Var};

fn loss<'t>(x: &Var<'t>, onehot: &Var<'t>, w: &Var<'t>, b: &Var<'t>) -> vibgraph::Result<Var<'t>> {
    let ones = x.tape().constant(Array2::ones((x.shape().0, 1)));
    let logits = x.matmul(w)?.add(&ones.matmul(b)?)?;
    Ok(logits
        .row_log_softmax()
        .mul(onehot)?
        .sum()
        .scale(-1.0 / x.shape().0 as f64))
}

fn main() -> vibgraph::Result<()> {
    let x: Matrix = array![[0.0, 0.2], [0.3, 0.1], [0.1, 0.4], [1.0, 0.9], [0.8, 1.1], [1.2, 0.7]];
    let onehot: Matrix = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];

    let mut params = ParamSet::new();
    params.insert("w", Array2::zeros((2, 2)));
    params.insert("b", Array2::zeros((1, 2)));
    let mut adam = AdamState::new(&params, AdamConfig::with_learning_rate(0.1));
    for epoch in 0..100 {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let l = loss(
            &tape.constant(x.clone()),
            &tape.constant(onehot.clone()),
            &bound[0],
            &bound[1],
        )?;
        if epoch % 20 == 0 {
            println!("epoch {epoch:>3}: cross-entropy {:.4}", l.item());
        }
        let grads = tape.backward(l)?;
        params.accumulate(&grads, &bound)?;
        adam.step(&mut params)?;
    }

    let values: Vec<Matrix> = params.iter().map(|(_, t)| t.value.clone()).collect();
    let err = grad_check(
        |tape, v| loss(&tape.constant(x.clone()), &tape.constant(onehot.clone()), &v[0], &v[1]),
        &values,
        1e-6,
    )?;
    println!("max relative gradient error {err:.2e}");
    Ok(())
}
