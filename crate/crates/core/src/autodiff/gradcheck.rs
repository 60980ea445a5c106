use super::tape::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Compare reverse-mode gradients of a scalar function against central
/// differences.
///
/// `f` receives one leaf per entry of `inputs` (all requiring grad) and must
/// return a 1x1 variable. The result is the maximum over every input entry of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, inputs: &[Matrix], h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("grad_check step must be positive, got {h}")));
    }
    let analytic: Vec<Matrix> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
        let out = f(&tape, &vars)?;
        let grads = tape.backward(out)?;
        vars.iter()
            .zip(inputs)
            .map(|(v, x)| grads.get(*v).cloned().unwrap_or_else(|| Matrix::zeros(x.dim())))
            .collect()
    };

    let eval = |probe: &[Matrix]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = probe.iter().map(|x| tape.constant(x.clone())).collect();
        let y = f(&tape, &vars)?.item();
        if !y.is_finite() {
            return Err(Error::Domain {
                op: "grad_check",
                msg: "function is not finite at a perturbed point".into(),
            });
        }
        Ok(y)
    };

    let mut probe: Vec<Matrix> = inputs.to_vec();
    let mut worst = 0.0_f64;
    for k in 0..inputs.len() {
        for idx in 0..inputs[k].len() {
            let (r, c) = (idx / inputs[k].ncols(), idx % inputs[k].ncols());
            let orig = probe[k][[r, c]];
            probe[k][[r, c]] = orig + h;
            let up = eval(&probe)?;
            probe[k][[r, c]] = orig - h;
            let down = eval(&probe)?;
            probe[k][[r, c]] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k][[r, c]];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
