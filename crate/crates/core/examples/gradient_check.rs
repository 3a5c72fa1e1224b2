//! Compares tape gradients with central differences, first for a small
//! conv/ReLU/L1 network and then for a full two-stage reconstruction loss.
//!
//! cargo run --release --example gradient_check

use dgdn::imaging::synthetic_set;
use dgdn::model::{forward, ModelVars};
use dgdn::tensor::{finite_diff_check_many, DEFAULT_FD_STEP};
use dgdn::training::total_loss;
use dgdn::{generate_mask, DgdnConfig, DgdnModel, MaskScheme, MeasurementOp, Tensor};

fn main() -> dgdn::Result<()> {
    let x = Tensor::from_fn(&[1, 6, 6], |i| ((i * 37) % 11) as f64 / 11.0 - 0.4);
    let target = Tensor::from_fn(&[2, 6, 6], |i| ((i * 13) % 7) as f64 / 7.0);
    let kernel = Tensor::from_fn(&[2, 1, 3, 3], |i| 0.2 * ((i % 5) as f64 - 2.0) + 0.05);
    let bias = Tensor::new(vec![2], vec![0.03, -0.07])?;
    let errs = finite_diff_check_many(
        |tape, v| {
            let y = tape.relu(tape.conv2d(v[0], v[1], v[2])?)?;
            tape.l1_loss(y, tape.constant(target.clone()))
        },
        &[x, kernel, bias],
        DEFAULT_FD_STEP,
    )?;
    println!("conv → relu → l1");
    for (name, e) in ["input", "kernel", "bias"].iter().zip(&errs) {
        println!("  {name:<7} worst relative error {e:.2e}");
    }

    let config = DgdnConfig::new(4, 2, 2);
    let model = DgdnModel::init(config, 5)?;
    let image = synthetic_set(1, 8, 8, 21).remove(0);
    let op = MeasurementOp::new(generate_mask(8, 8, 0.3, MaskScheme::PseudoRadial, 1)?)?;
    let y = op.apply_forward(&image)?;
    let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let errs = finite_diff_check_many(
        |tape, vars| {
            let mv = ModelVars::from_vars(&config, vars)?;
            let trace = forward(tape, &mv, &y, &op, None)?;
            total_loss(tape, &trace, tape.constant(image.clone()))
        },
        &params,
        DEFAULT_FD_STEP,
    )?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    println!("two-stage network, {} parameter tensors: worst relative error {worst:.2e}", params.len());
    Ok(())
}
