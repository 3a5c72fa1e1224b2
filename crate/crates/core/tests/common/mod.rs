//! Reference implementations written straight from the defining formulas.
//! They are deliberately slow and share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use dgdn::fourier::SamplingMask;
use dgdn::Tensor;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Entries bounded away from zero, for ops with a kink at the origin.
pub fn random_away_from_zero(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// X[u,v] = (HW)^{-1/2} Σ x[a,b] e^{∓2πi(ua/H + vb/W)}.
pub fn naive_dft2(x: &[Complex64], h: usize, w: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..h {
                for b in 0..w {
                    let phase = sign * 2.0 * PI * ((u * a) as f64 / h as f64 + (v * b) as f64 / w as f64);
                    acc += x[a * w + b] * Complex64::from_polar(1.0, phase);
                }
            }
            out[u * w + v] = acc * norm;
        }
    }
    out
}

/// Dense complex matrix of P·DFT acting on a flattened real image; rows
/// of unsampled frequencies are zero.
pub fn dense_measurement(mask: &SamplingMask) -> Vec<Vec<Complex64>> {
    let (h, w) = mask.extents();
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut rows = Vec::with_capacity(h * w);
    for u in 0..h {
        for v in 0..w {
            let keep = mask.is_sampled(u, v);
            let row = (0..h * w)
                .map(|j| {
                    if !keep {
                        return Complex64::new(0.0, 0.0);
                    }
                    let (a, b) = (j / w, j % w);
                    let phase = -2.0 * PI * ((u * a) as f64 / h as f64 + (v * b) as f64 / w as f64);
                    Complex64::from_polar(norm, phase)
                })
                .collect();
            rows.push(row);
        }
    }
    rows
}

/// `x − η·Re(Aᴴ(Ax − y))` with a dense `A`.
pub fn dense_gradient_step(a: &[Vec<Complex64>], x: &[f64], y: &[Complex64], eta: f64) -> Vec<f64> {
    let n = x.len();
    let r: Vec<Complex64> = a
        .iter()
        .zip(y)
        .map(|(row, yi)| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<Complex64>() - yi)
        .collect();
    (0..n)
        .map(|j| {
            let g: Complex64 = a.iter().zip(&r).map(|(row, ri)| row[j].conj() * ri).sum();
            x[j] - eta * g.re
        })
        .collect()
}

/// Zero-padded same-size cross-correlation, one output pixel at a time.
pub fn naive_conv(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let (cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (cout, kh, kw) = (kernel.shape()[0], kernel.shape()[2], kernel.shape()[3]);
    let at = |c: usize, y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            input.data()[(c * h + y as usize) * w + x as usize]
        }
    };
    Tensor::from_fn(&[cout, h, w], |idx| {
        let (o, y, x) = (idx / (h * w), (idx / w) % h, idx % w);
        let mut acc = bias.data()[o];
        for c in 0..cin {
            for i in 0..kh {
                for j in 0..kw {
                    let wt = kernel.data()[((o * cin + c) * kh + i) * kw + j];
                    acc += wt * at(c, y as isize + i as isize - (kh / 2) as isize, x as isize + j as isize - (kw / 2) as isize);
                }
            }
        }
        acc
    })
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| v.max(0.0))
}

pub fn concat(parts: &[&Tensor]) -> Tensor {
    let (h, w) = (parts[0].shape()[1], parts[0].shape()[2]);
    let c: usize = parts.iter().map(|p| p.shape()[0]).sum();
    let data: Vec<f64> = parts.iter().flat_map(|p| p.data().iter().copied()).collect();
    Tensor::new(vec![c, h, w], data).unwrap()
}

/// C[k,i] = α_k cos(π(2i+1)k / 2n), applied along both axes by direct sums.
pub fn naive_dct2(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let alpha = |k: usize, n: usize| {
        if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        }
    };
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = 0.0;
            for a in 0..h {
                for b in 0..w {
                    acc += x[a * w + b]
                        * (PI * (2 * a + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                        * (PI * (2 * b + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                }
            }
            out[u * w + v] = alpha(u, h) * alpha(v, w) * acc;
        }
    }
    out
}

/// Minimizer of ½(t − v)² + θ|t| by successively finer grid searches.
pub fn grid_search_prox(v: f64, theta: f64) -> f64 {
    let obj = |t: f64| 0.5 * (t - v) * (t - v) + theta * t.abs();
    let (mut lo, mut hi) = (-v.abs() - 1.0, v.abs() + 1.0);
    let mut best = 0.0;
    for _ in 0..12 {
        let n = 2000;
        let step = (hi - lo) / n as f64;
        let mut best_val = f64::INFINITY;
        for i in 0..=n {
            let t = lo + step * i as f64;
            let f = obj(t);
            if f < best_val {
                best_val = f;
                best = t;
            }
        }
        if obj(0.0) <= best_val {
            best = 0.0;
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

pub fn literal_psnr(a: &Tensor, b: &Tensor) -> f64 {
    let mut sq = 0.0;
    for i in 0..a.len() {
        let d = a.data()[i] - b.data()[i];
        sq += d * d;
    }
    let mse = sq / a.len() as f64;
    10.0 * (1.0 / mse).log10()
}

/// Sliding 11×11 Gaussian window (σ = 1.5), statistics computed directly
/// from the 2-D weights at every valid position.
pub fn literal_ssim(a: &Tensor, b: &Tensor) -> f64 {
    let (h, w) = (a.shape()[1], a.shape()[2]);
    let n = 11;
    let sigma = 1.5f64;
    let mut win = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * n + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (pa, pb) = (a.data(), b.data());
    let mut acc = 0.0;
    let mut count = 0usize;
    for r in 0..=h - n {
        for c in 0..=w - n {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (r + i) * w + c + j;
                    ma += win[i * n + j] * pa[k];
                    mb += win[i * n + j] * pb[k];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (r + i) * w + c + j;
                    let wt = win[i * n + j];
                    va += wt * (pa[k] - ma) * (pa[k] - ma);
                    vb += wt * (pb[k] - mb) * (pb[k] - mb);
                    cov += wt * (pa[k] - ma) * (pb[k] - mb);
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

pub fn sample_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// ⟨a, b⟩ over real and imaginary parts.
pub fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}
