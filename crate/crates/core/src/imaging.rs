//! Grayscale PGM I/O and seeded synthetic phantoms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

/// Loads an 8- or 16-bit grayscale PGM as a 1×H×W tensor in [0, 1].
pub fn load_pgm(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::Format {
                kind: "image",
                detail: format!("{}: expected grayscale, got {:?}", path.display(), other.color()),
            })
        }
    };
    Tensor::new(vec![1, h, w], data)
}

/// Writes a 1×H×W tensor as binary PGM (P5), clamping to [0, 1] first.
/// 16-bit samples are big-endian as the format requires.
pub fn save_pgm(path: impl AsRef<Path>, image: &Tensor, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let (c, h, w) = image.chw("save_pgm")?;
    if c != 1 {
        return Err(Error::shape("save_pgm", format!("{c} channels, expected 1")));
    }
    let quantize = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
    let (maxval, body): (u32, Vec<u8>) = match depth {
        BitDepth::Eight => (255, image.data().iter().map(|&v| quantize(v, 255.0) as u8).collect()),
        BitDepth::Sixteen => (
            65535,
            image
                .data()
                .iter()
                .flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes())
                .collect(),
        ),
    };
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write!(out, "P5\n{w} {h}\n{maxval}\n")
        .and_then(|_| out.write_all(&body))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Every `*.pgm` in `dir`, sorted by file name.
pub fn load_pgm_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_pgm(&p)?))
        })
        .collect()
}

struct Ellipse {
    value: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi_deg: f64,
}

fn rasterize(h: usize, w: usize, ellipses: &[Ellipse]) -> Vec<f64> {
    let mut img = vec![0.0; h * w];
    for e in ellipses {
        let (s, c) = e.phi_deg.to_radians().sin_cos();
        for r in 0..h {
            let y = 1.0 - 2.0 * (r as f64 + 0.5) / h as f64;
            for col in 0..w {
                let x = 2.0 * (col as f64 + 0.5) / w as f64 - 1.0;
                let (dx, dy) = (x - e.x0, y - e.y0);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if (u / e.a).powi(2) + (v / e.b).powi(2) <= 1.0 {
                    img[r * w + col] += e.value;
                }
            }
        }
    }
    img
}

/// Modified (high-contrast) Shepp–Logan head phantom in [0, 1].
pub fn shepp_logan(h: usize, w: usize) -> Tensor {
    #[rustfmt::skip]
    let table = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
        (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
        (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
        (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
        (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
        (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
        (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
        (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
        (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
    ];
    let ellipses: Vec<Ellipse> = table
        .iter()
        .map(|&(value, a, b, x0, y0, phi_deg)| Ellipse {
            value,
            a,
            b,
            x0,
            y0,
            phi_deg,
        })
        .collect();
    let data = rasterize(h, w, &ellipses)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Tensor::new(vec![1, h, w], data).expect("extents match")
}

/// Piecewise-smooth brain-like phantom: a bright rim, a soft-tissue
/// interior, random inner ellipses and a low-amplitude smooth texture.
pub fn synthetic_phantom(h: usize, w: usize, rng: &mut impl Rng) -> Tensor {
    let a = rng.gen_range(0.78..0.92);
    let b = rng.gen_range(0.85..0.95);
    let rim = rng.gen_range(0.06..0.1);
    let mut ellipses = vec![
        Ellipse {
            value: rng.gen_range(0.85..1.0),
            a,
            b,
            x0: 0.0,
            y0: 0.0,
            phi_deg: rng.gen_range(-10.0..10.0),
        },
        Ellipse {
            value: -rng.gen_range(0.45..0.6),
            a: a - rim,
            b: b - rim,
            x0: 0.0,
            y0: 0.0,
            phi_deg: 0.0,
        },
    ];
    ellipses[1].phi_deg = ellipses[0].phi_deg;
    let n_inner = rng.gen_range(3..=6);
    for _ in 0..n_inner {
        let r = rng.gen_range(0.0..0.5);
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        ellipses.push(Ellipse {
            value: rng.gen_range(-0.25..0.35),
            a: rng.gen_range(0.05..0.3),
            b: rng.gen_range(0.05..0.3),
            x0: r * t.cos() * a,
            y0: r * t.sin() * b,
            phi_deg: rng.gen_range(0.0..180.0),
        });
    }
    let base = rasterize(h, w, &ellipses);
    let (fx, fy) = (rng.gen_range(2.0..6.0), rng.gen_range(2.0..6.0));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let amp = rng.gen_range(0.02..0.05);
    let data = base
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v <= 0.0 {
                return 0.0;
            }
            let y = (i / w) as f64 / h as f64;
            let x = (i % w) as f64 / w as f64;
            let tex = amp * (std::f64::consts::TAU * (fx * x + fy * y) + phase).sin();
            (v + tex).clamp(0.0, 1.0)
        })
        .collect();
    Tensor::new(vec![1, h, w], data).expect("extents match")
}

/// `count` phantoms from one seeded stream.
pub fn synthetic_set(count: usize, h: usize, w: usize, seed: u64) -> Vec<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| synthetic_phantom(h, w, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantoms_are_normalized_and_deterministic() {
        let a = synthetic_set(3, 32, 32, 1);
        let b = synthetic_set(3, 32, 32, 1);
        assert_eq!(a, b);
        for p in &a {
            assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(p.data().iter().any(|&v| v > 0.3));
        }
        let sl = shepp_logan(64, 64);
        assert!(sl.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sixteen_bit_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = Tensor::from_fn(&[1, 5, 7], |i| ((i * 977) % 65536) as f64 / 65535.0);
        save_pgm(&path, &img, BitDepth::Sixteen).unwrap();
        let back = load_pgm(&path).unwrap();
        assert_eq!(back, img);
        let eight = dir.path().join("y.pgm");
        save_pgm(&eight, &back, BitDepth::Eight).unwrap();
        let b8 = load_pgm(&eight).unwrap();
        assert!(b8.max_abs_diff(&img) <= 0.5 / 255.0 + 1e-12);
    }
}
