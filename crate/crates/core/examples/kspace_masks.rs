//! Generates sampling masks, prints them centered on the DC coefficient and
//! checks that the text format round-trips.
//!
//! cargo run --release --example kspace_masks -- [ratio]

use dgdn::{generate_mask, MaskScheme, SamplingMask};

fn show(mask: &SamplingMask) {
    let (h, w) = mask.extents();
    for r in 0..h {
        let u = (r + h - h / 2) % h;
        let line: String = (0..w)
            .map(|c| if mask.is_sampled(u, (c + w - w / 2) % w) { '#' } else { '.' })
            .collect();
        println!("  {line}");
    }
}

fn main() -> dgdn::Result<()> {
    let ratio = std::env::args().nth(1).map_or(0.2, |s| s.parse().expect("ratio"));
    for scheme in [MaskScheme::PseudoRadial, MaskScheme::RandomUniform] {
        let m = generate_mask(24, 32, ratio, scheme, 3)?;
        println!("{scheme} at {ratio}: {} of {} samples ({:.4})", m.count(), 24 * 32, m.sampled_fraction());
        show(&m);
        assert_eq!(SamplingMask::from_text(&m.to_text())?, m);
    }

    println!("sampled fraction at 256×256:");
    for r in [0.01, 0.04, 0.1, 0.25, 0.3, 0.4, 0.5] {
        let radial = generate_mask(256, 256, r, MaskScheme::PseudoRadial, 0)?;
        let random = generate_mask(256, 256, r, MaskScheme::RandomUniform, 0)?;
        println!("  {r:>5}  radial {:.5}  random {:.5}", radial.sampled_fraction(), random.sampled_fraction());
    }
    Ok(())
}
