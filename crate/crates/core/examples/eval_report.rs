//! Trains one small network per sampling ratio and prints the comparison
//! table against zero-filling and ISTA on held-out phantoms.
//!
//! cargo run --release --example eval_report

use dgdn::baselines::IstaConfig;
use dgdn::eval::{evaluate_dataset, MaskSpec, Method};
use dgdn::imaging::synthetic_set;
use dgdn::{train, Dataset, DgdnModel, MaskScheme, TrainConfig};

fn main() -> dgdn::Result<()> {
    let ratios = [0.1, 0.3, 0.5];
    let mut images = synthetic_set(22, 24, 24, 5);
    let test: Vec<_> = images.split_off(16).into_iter().enumerate().map(|(i, x)| (format!("test_{i}"), x)).collect();
    let data = Dataset { train: images, val: Vec::new() };

    let mut checkpoints = Vec::new();
    for &ratio in &ratios {
        let cfg = TrainConfig {
            epochs: 30,
            lr: 1e-3,
            p: 6,
            k: 3,
            stages: 4,
            ..TrainConfig::new(ratio)
        };
        let (model, log) = train(DgdnModel::init(cfg.model_config(), cfg.seed)?, &data, &cfg, None)?;
        println!("ratio {ratio}: final loss {:.4}", log.last_epoch_loss().unwrap_or(f64::NAN));
        checkpoints.push((ratio, model));
    }

    let methods = [
        Method::ZeroFilling,
        Method::Ista(IstaConfig { steps: 100, ..IstaConfig::default() }),
        Method::Dgdn { name: "dgdn".into(), checkpoints },
    ];
    let masks = MaskSpec { scheme: MaskScheme::PseudoRadial, seed: 0 };
    let report = evaluate_dataset(&methods, &test, &ratios, masks)?;
    print!("{}", report.render_table());
    Ok(())
}
