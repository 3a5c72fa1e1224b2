use std::path::Path;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;

use super::dft::{Dft2, Direction};
use super::mask::SamplingMask;
use crate::error::{Error, Result};
use crate::tensor::{LinearMap, Tape, Tensor, Var};

const KSPACE_MAGIC: &[u8; 4] = b"KSP1";

/// Dense zero-filled k-space samples in native DFT layout.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    h: usize,
    w: usize,
    values: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(h: usize, w: usize, values: Vec<Complex64>) -> Result<Self> {
        if h == 0 || w == 0 || values.len() != h * w {
            return Err(Error::shape(
                "kspace",
                format!("{} values for a {h}×{w} grid", values.len()),
            ));
        }
        Ok(Self { h, w, values })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            values: vec![Complex64::new(0.0, 0.0); h * w],
        }
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Complex inner product ⟨self, other⟩ = Σ conj(self)·other.
    pub fn inner(&self, other: &KSpaceData) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Zeroes every coefficient outside `mask`.
    pub fn masked(mut self, mask: &SamplingMask) -> Self {
        for (v, &keep) in self.values.iter_mut().zip(mask.grid()) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self
    }

    /// Real tensor of shape 2×H×W holding the real and imaginary planes.
    pub fn to_tensor(&self) -> Tensor {
        let n = self.h * self.w;
        let mut data = Vec::with_capacity(2 * n);
        data.extend(self.values.iter().map(|v| v.re));
        data.extend(self.values.iter().map(|v| v.im));
        Tensor::new(vec![2, self.h, self.w], data).expect("planes match extents")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.chw("kspace")?;
        if c != 2 {
            return Err(Error::shape("kspace", format!("expected 2 planes, got {c}")));
        }
        let n = h * w;
        let d = t.data();
        let values = (0..n).map(|i| Complex64::new(d[i], d[n + i])).collect();
        Self::new(h, w, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 16 * self.values.len());
        out.extend_from_slice(KSPACE_MAGIC);
        out.extend_from_slice(&(self.h as u32).to_le_bytes());
        out.extend_from_slice(&(self.w as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            kind: "k-space",
            detail,
        };
        if bytes.len() < 12 || &bytes[..4] != KSPACE_MAGIC {
            return Err(bad("missing KSP1 magic".into()));
        }
        let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != 16 * h * w {
            return Err(bad(format!(
                "{} payload bytes for a {h}×{w} grid",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::new(h, w, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Under-sampled unitary Fourier operator `P·DFT` on real H×W images.
#[derive(Debug, Clone)]
pub struct MeasurementOp {
    mask: Arc<SamplingMask>,
    dft: Dft2,
}

impl MeasurementOp {
    pub fn new(mask: SamplingMask) -> Result<Self> {
        let (h, w) = mask.extents();
        Ok(Self {
            dft: Dft2::new(h, w)?,
            mask: Arc::new(mask),
        })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn extents(&self) -> (usize, usize) {
        self.mask.extents()
    }

    fn check_image(&self, x: &Tensor, op: &'static str) -> Result<()> {
        let (h, w) = self.extents();
        if x.shape() != [1, h, w] {
            return Err(Error::shape(
                op,
                format!("expected [1, {h}, {w}], got {:?}", x.shape()),
            ));
        }
        Ok(())
    }

    fn check_kspace(&self, y: &KSpaceData, op: &'static str) -> Result<()> {
        if y.extents() != self.extents() {
            return Err(Error::shape(
                op,
                format!("k-space {:?} vs operator {:?}", y.extents(), self.extents()),
            ));
        }
        Ok(())
    }

    fn forward_raw(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.dft.process(&mut buf, Direction::Forward);
        for (v, &keep) in buf.iter_mut().zip(self.mask.grid()) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        buf
    }

    fn adjoint_raw(&self, y: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = y
            .iter()
            .zip(self.mask.grid())
            .map(|(&v, &keep)| if keep { v } else { Complex64::new(0.0, 0.0) })
            .collect();
        self.dft.process(&mut buf, Direction::Inverse);
        buf.into_iter().map(|v| v.re).collect()
    }

    /// `mask ⊙ DFT(x)` for a real 1×H×W image.
    pub fn apply_forward(&self, x: &Tensor) -> Result<KSpaceData> {
        self.check_image(x, "apply_forward")?;
        let (h, w) = self.extents();
        KSpaceData::new(h, w, self.forward_raw(x.data()))
    }

    /// Real part of the inverse DFT of the zero-filled samples.
    pub fn apply_adjoint(&self, y: &KSpaceData) -> Result<Tensor> {
        self.check_kspace(y, "apply_adjoint")?;
        let (h, w) = self.extents();
        Tensor::new(vec![1, h, w], self.adjoint_raw(y.values()))
    }

    /// Tape form of [`apply_forward`](Self::apply_forward): 1×H×W → 2×H×W
    /// (real and imaginary planes).
    pub fn forward_var<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        tape.linear(x, Rc::new(ForwardMap(self.clone())))
    }

    /// Tape form of [`apply_adjoint`](Self::apply_adjoint): 2×H×W → 1×H×W.
    pub fn adjoint_var<'t>(&self, tape: &'t Tape, y: Var<'t>) -> Result<Var<'t>> {
        tape.linear(y, Rc::new(AdjointMap(self.clone())))
    }
}

/// x ↦ (Re, Im) of P·DFT·x. Its real adjoint is g ↦ Re(DFTᴴ·P·(g_re + i g_im)).
struct ForwardMap(MeasurementOp);

/// (y_re, y_im) ↦ Re(DFTᴴ·P·y). Its real adjoint is the forward map.
struct AdjointMap(MeasurementOp);

fn planes_to_complex(t: &Tensor) -> Vec<Complex64> {
    let n = t.len() / 2;
    let d = t.data();
    (0..n).map(|i| Complex64::new(d[i], d[n + i])).collect()
}

fn complex_to_planes(values: Vec<Complex64>, h: usize, w: usize) -> Tensor {
    let mut data = Vec::with_capacity(2 * values.len());
    data.extend(values.iter().map(|v| v.re));
    data.extend(values.iter().map(|v| v.im));
    Tensor::new(vec![2, h, w], data).expect("planes match extents")
}

impl LinearMap for ForwardMap {
    fn name(&self) -> &'static str {
        "measure_forward"
    }

    fn input_shape(&self) -> Vec<usize> {
        let (h, w) = self.0.extents();
        vec![1, h, w]
    }

    fn output_shape(&self) -> Vec<usize> {
        let (h, w) = self.0.extents();
        vec![2, h, w]
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        let (h, w) = self.0.extents();
        complex_to_planes(self.0.forward_raw(x.data()), h, w)
    }

    fn adjoint(&self, g: &Tensor) -> Tensor {
        let (h, w) = self.0.extents();
        Tensor::new(vec![1, h, w], self.0.adjoint_raw(&planes_to_complex(g))).expect("extents")
    }
}

impl LinearMap for AdjointMap {
    fn name(&self) -> &'static str {
        "measure_adjoint"
    }

    fn input_shape(&self) -> Vec<usize> {
        let (h, w) = self.0.extents();
        vec![2, h, w]
    }

    fn output_shape(&self) -> Vec<usize> {
        let (h, w) = self.0.extents();
        vec![1, h, w]
    }

    fn apply(&self, y: &Tensor) -> Tensor {
        let (h, w) = self.0.extents();
        Tensor::new(vec![1, h, w], self.0.adjoint_raw(&planes_to_complex(y))).expect("extents")
    }

    fn adjoint(&self, g: &Tensor) -> Tensor {
        let (h, w) = self.0.extents();
        complex_to_planes(self.0.forward_raw(g.data()), h, w)
    }
}

/// Noiseless acquisition `y = P·DFT·x`.
pub fn simulate_measurement(x: &Tensor, mask: &SamplingMask) -> Result<KSpaceData> {
    MeasurementOp::new(mask.clone())?.apply_forward(x)
}
