//! Central-difference gradient oracle.

use super::{Tape, Tensor, Var};
use crate::error::Result;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Worst relative error between the tape gradient of scalar `f` at `x`
/// and central differences with step `h`. The denominator is
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let errs = finite_diff_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), h)?;
    Ok(errs[0])
}

/// Multi-input variant; returns the worst relative error per input.
pub fn finite_diff_check_many<F>(f: F, inputs: &[Tensor], h: f64) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let grads = tape.backward(out)?;
        vars.iter()
            .map(|v| grads.expect(*v).cloned())
            .collect::<Result<_>>()?
    };

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.value().item())
    };

    let mut worst = vec![0.0f64; inputs.len()];
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let x0 = input.data()[i];
            work[which].data_mut()[i] = x0 + h;
            let fp = eval(&work)?;
            work[which].data_mut()[i] = x0 - h;
            let fm = eval(&work)?;
            work[which].data_mut()[i] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[which].data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst[which] = worst[which].max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
