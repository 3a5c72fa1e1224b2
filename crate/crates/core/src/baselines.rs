//! Non-learned reconstructions: zero-filling and ISTA with an ℓ1 prior in
//! an orthonormal transform domain.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{Direction, KSpaceData, MeasurementOp};
use crate::metrics::psnr;
use crate::tensor::Tensor;

/// Inverse DFT of the zero-filled samples.
pub fn zero_filling(y: &KSpaceData, op: &MeasurementOp) -> Result<Tensor> {
    op.apply_adjoint(y)
}

/// `sign(v)·max(|v| − θ, 0)`, the proximal map of `θ|·|`.
pub fn soft_threshold_value(v: f64, theta: f64) -> f64 {
    let mag = v.abs() - theta;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

pub fn soft_threshold(v: &Tensor, theta: f64) -> Result<Tensor> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::invalid(format!("threshold must be nonnegative, got {theta}")));
    }
    Ok(v.map(|x| soft_threshold_value(x, theta)))
}

/// Orthonormal type-II DCT along both axes (inverse is type-III).
#[derive(Debug, Clone)]
pub struct Dct2 {
    h: usize,
    w: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            c[k * n + i] =
                alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

impl Dct2 {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!("zero-sized DCT grid {h}×{w}")));
        }
        Ok(Self {
            h,
            w,
            rows: dct_matrix(h),
            cols: dct_matrix(w),
        })
    }

    /// Transforms a row-major H×W buffer.
    pub fn apply(&self, x: &[f64], dir: Direction) -> Vec<f64> {
        let (h, w) = (self.h, self.w);
        assert_eq!(x.len(), h * w, "DCT input size");
        // along rows (width axis)
        let mut tmp = vec![0.0; h * w];
        for r in 0..h {
            let src = &x[r * w..(r + 1) * w];
            let dst = &mut tmp[r * w..(r + 1) * w];
            for (k, d) in dst.iter_mut().enumerate() {
                *d = match dir {
                    Direction::Forward => (0..w).map(|i| self.cols[k * w + i] * src[i]).sum(),
                    Direction::Inverse => (0..w).map(|i| self.cols[i * w + k] * src[i]).sum(),
                };
            }
        }
        // along columns (height axis)
        let mut out = vec![0.0; h * w];
        for k in 0..h {
            for i in 0..h {
                let c = match dir {
                    Direction::Forward => self.rows[k * h + i],
                    Direction::Inverse => self.rows[i * h + k],
                };
                if c == 0.0 {
                    continue;
                }
                let src = &tmp[i * w..(i + 1) * w];
                for (o, s) in out[k * w..(k + 1) * w].iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
        out
    }
}

pub fn dct2(image: &[f64], h: usize, w: usize, dir: Direction) -> Result<Vec<f64>> {
    if image.len() != h * w {
        return Err(Error::shape("dct2", format!("{} values for a {h}×{w} grid", image.len())));
    }
    Ok(Dct2::new(h, w)?.apply(image, dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SparsifyingTransform {
    #[default]
    Dct2,
    Identity,
}

impl FromStr for SparsifyingTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dct2" | "dct" => Ok(Self::Dct2),
            "identity" => Ok(Self::Identity),
            other => Err(Error::invalid(format!("unknown transform {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IstaConfig {
    pub steps: usize,
    /// Step length; at most 1 since the data-term gradient is 1-Lipschitz.
    pub eta: f64,
    /// Regularization weight; the threshold per step is `eta·gamma`.
    pub gamma: f64,
    #[serde(default)]
    pub transform: SparsifyingTransform,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            eta: 1.0,
            gamma: 1e-3,
            transform: SparsifyingTransform::Dct2,
        }
    }
}

impl IstaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("ISTA needs at least one step"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("ISTA step length {} outside (0, 1]", self.eta)));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::invalid(format!("ISTA gamma {} must be ≥ 0", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaStep {
    pub step: usize,
    pub objective: f64,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IstaResult {
    pub image: Tensor,
    /// Step 0 is the zero-filled starting point.
    pub trace: Vec<IstaStep>,
}

impl IstaResult {
    /// `step,objective,psnr` rows; psnr is empty without a reference image.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("step,objective,psnr\n");
        for st in &self.trace {
            let p = st.psnr.map(crate::metrics::format_db).unwrap_or_default();
            let _ = writeln!(s, "{},{:.12e},{}", st.step, st.objective, p);
        }
        s
    }
}

struct Prior {
    dct: Option<Dct2>,
}

impl Prior {
    fn new(transform: SparsifyingTransform, h: usize, w: usize) -> Result<Self> {
        Ok(Self {
            dct: match transform {
                SparsifyingTransform::Dct2 => Some(Dct2::new(h, w)?),
                SparsifyingTransform::Identity => None,
            },
        })
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        match &self.dct {
            Some(d) => d.apply(x, Direction::Forward),
            None => x.to_vec(),
        }
    }

    fn inverse(&self, c: &[f64]) -> Vec<f64> {
        match &self.dct {
            Some(d) => d.apply(c, Direction::Inverse),
            None => c.to_vec(),
        }
    }
}

/// `E(x) = ½‖Fx − y‖² + γ‖Ψx‖₁` for an orthonormal transform `Ψ`.
pub fn ista_objective(x: &Tensor, y: &KSpaceData, op: &MeasurementOp, gamma: f64, transform: SparsifyingTransform) -> Result<f64> {
    let (h, w) = op.extents();
    let prior = Prior::new(transform, h, w)?;
    objective(x, y, op, gamma, &prior)
}

fn objective(x: &Tensor, y: &KSpaceData, op: &MeasurementOp, gamma: f64, prior: &Prior) -> Result<f64> {
    let fx = op.apply_forward(x)?;
    let fidelity: f64 = fx
        .values()
        .iter()
        .zip(y.values())
        .zip(op.mask().grid())
        .filter(|(_, &keep)| keep)
        .map(|((a, b), _)| (a - b).norm_sqr())
        .sum();
    let reg: f64 = if gamma == 0.0 {
        0.0
    } else {
        prior.forward(x.data()).iter().map(|c| c.abs()).sum()
    };
    Ok(0.5 * fidelity + gamma * reg)
}

/// Proximal gradient iteration starting from zero-filling: a gradient
/// step `m = x − η·Fᴴ(Fx − y)` followed by soft thresholding of `Ψm` at
/// `η·γ`.
pub fn ista_reconstruct(
    y: &KSpaceData,
    op: &MeasurementOp,
    cfg: &IstaConfig,
    reference: Option<&Tensor>,
) -> Result<IstaResult> {
    cfg.validate()?;
    let (h, w) = op.extents();
    let prior = Prior::new(cfg.transform, h, w)?;
    let theta = cfg.eta * cfg.gamma;
    let mut x = zero_filling(y, op)?;
    let record = |step: usize, x: &Tensor| -> Result<IstaStep> {
        Ok(IstaStep {
            step,
            objective: objective(x, y, op, cfg.gamma, &prior)?,
            psnr: reference.map(|r| psnr(x, r, 1.0)).transpose()?,
        })
    };
    let mut trace = vec![record(0, &x)?];
    for step in 1..=cfg.steps {
        let fx = op.apply_forward(&x)?;
        let residual: Vec<_> = fx.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
        let grad = op.apply_adjoint(&KSpaceData::new(h, w, residual)?)?;
        let m: Vec<f64> = x
            .data()
            .iter()
            .zip(grad.data())
            .map(|(xi, gi)| xi - cfg.eta * gi)
            .collect();
        let coeffs: Vec<f64> = prior
            .forward(&m)
            .into_iter()
            .map(|c| soft_threshold_value(c, theta))
            .collect();
        x = Tensor::new(vec![1, h, w], prior.inverse(&coeffs))?;
        trace.push(record(step, &x)?);
    }
    Ok(IstaResult { image: x, trace })
}
