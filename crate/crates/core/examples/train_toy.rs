//! Trains a small network on seeded 32×32 phantoms and compares it with
//! zero-filling on held-out images.
//!
//! cargo run --release --example train_toy -- [epochs] [lr]

use std::time::Instant;

use dgdn::baselines::zero_filling;
use dgdn::fourier::MeasurementOp;
use dgdn::imaging::synthetic_set;
use dgdn::metrics::psnr;
use dgdn::training::training_mask;
use dgdn::{train, Dataset, DgdnModel, TrainConfig};

fn main() -> dgdn::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(50, |s| s.parse().expect("epochs"));
    let lr = args.next().map_or(1e-3, |s| s.parse().expect("lr"));

    let mut images = synthetic_set(25, 32, 32, 7);
    let test = images.split_off(20);
    let data = Dataset {
        train: images,
        val: Vec::new(),
    };

    let cfg = TrainConfig {
        epochs,
        lr,
        p: 8,
        k: 3,
        stages: 5,
        seed: 1,
        ..TrainConfig::new(0.2)
    };
    let model = DgdnModel::init(cfg.model_config(), cfg.seed)?;
    println!("{} parameters", model.num_parameters());

    let start = Instant::now();
    let (model, log) = train(model, &data, &cfg, None)?;
    let elapsed = start.elapsed();
    for e in log.epochs.iter().step_by((epochs / 10).max(1)) {
        println!("epoch {:>3}  loss {:.5}", e.epoch, e.mean_loss);
    }

    let op = MeasurementOp::new(training_mask(&cfg, 32, 32)?)?;
    let (mut zf, mut net) = (0.0, 0.0);
    for x in &test {
        let y = op.apply_forward(x)?;
        zf += psnr(&zero_filling(&y, &op)?, x, 1.0)?;
        net += psnr(&model.reconstruct(&y, &op, None)?, x, 1.0)?;
    }
    let n = test.len() as f64;
    println!(
        "loss {:.5} -> {:.5}   zero-filling {:.2} dB   network {:.2} dB   {:.1?}",
        log.first_epoch_loss().unwrap_or(f64::NAN),
        log.last_epoch_loss().unwrap_or(f64::NAN),
        zf / n,
        net / n,
        elapsed
    );
    println!("step lengths {:?}", model.step_lengths());
    Ok(())
}
