//! Trains briefly, saves a checkpoint, reloads it and reconstructs an
//! unseen phantom from stored k-space.
//!
//! cargo run --release --example reconstruct

use dgdn::baselines::zero_filling;
use dgdn::imaging::{save_pgm, synthetic_set, BitDepth};
use dgdn::metrics::psnr;
use dgdn::training::training_mask;
use dgdn::{load_checkpoint, save_checkpoint, train, Dataset, DgdnModel, KSpaceData, MeasurementOp, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("dgdn_reconstruct_example");
    std::fs::create_dir_all(&dir)?;

    let mut images = synthetic_set(21, 32, 32, 40);
    let unseen = images.pop().unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        lr: 1e-3,
        p: 8,
        k: 3,
        stages: 5,
        ..TrainConfig::new(0.2)
    };
    let data = Dataset { train: images, val: Vec::new() };
    let (model, _) = train(DgdnModel::init(cfg.model_config(), cfg.seed)?, &data, &cfg, None)?;

    let ckpt = dir.join("model.dgdn");
    save_checkpoint(&model, &ckpt)?;
    let restored = load_checkpoint(&ckpt)?;
    assert_eq!(restored.to_checkpoint_bytes(), model.to_checkpoint_bytes());

    let op = MeasurementOp::new(training_mask(&cfg, 32, 32)?)?;
    let ksp = dir.join("unseen.ksp");
    op.apply_forward(&unseen)?.save(&ksp)?;
    let y = KSpaceData::load(&ksp)?;

    let rec = restored.reconstruct(&y, &op, None)?;
    let zf = zero_filling(&y, &op)?;
    println!("checkpoint {} ({} parameters)", ckpt.display(), restored.num_parameters());
    println!("zero-filling {:.2} dB, network {:.2} dB", psnr(&zf, &unseen, 1.0)?, psnr(&rec, &unseen, 1.0)?);
    save_pgm(dir.join("reconstruction.pgm"), &rec, BitDepth::Sixteen)?;
    println!("wrote {}", dir.join("reconstruction.pgm").display());
    Ok(())
}
