//! Zero-filling and DCT-regularized ISTA on a 64×64 Shepp–Logan phantom.
//! With an output directory the reconstructions are written as PGM files.
//!
//! cargo run --release --example classical_baselines -- [out_dir]

use std::path::PathBuf;

use dgdn::baselines::{ista_reconstruct, zero_filling, IstaConfig};
use dgdn::imaging::{save_pgm, shepp_logan, BitDepth};
use dgdn::metrics::{psnr, ssim};
use dgdn::{generate_mask, MaskScheme, MeasurementOp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let x = shepp_logan(64, 64);
    let cfg = IstaConfig::default();
    println!("ratio  zero-filling (dB / SSIM)  ista (dB / SSIM)  objective");
    for ratio in [0.1, 0.2, 0.3, 0.5] {
        let op = MeasurementOp::new(generate_mask(64, 64, ratio, MaskScheme::PseudoRadial, 0)?)?;
        let y = op.apply_forward(&x)?;
        let zf = zero_filling(&y, &op)?;
        let res = ista_reconstruct(&y, &op, &cfg, Some(&x))?;
        let (first, last) = (res.trace[0].objective, res.trace.last().unwrap().objective);
        println!(
            "{ratio:>5}  {:>8.2} / {:.4}         {:>7.2} / {:.4}   {first:.4e} → {last:.4e}",
            psnr(&zf, &x, 1.0)?,
            ssim(&zf, &x)?,
            psnr(&res.image, &x, 1.0)?,
            ssim(&res.image, &x)?,
        );
        if let Some(dir) = &out {
            save_pgm(dir.join(format!("zero_filling_{ratio}.pgm")), &zf, BitDepth::Sixteen)?;
            save_pgm(dir.join(format!("ista_{ratio}.pgm")), &res.image, BitDepth::Sixteen)?;
        }
    }
    Ok(())
}
