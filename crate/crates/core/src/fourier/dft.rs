use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Planned orthonormal 2-D DFT for a fixed H×W grid.
#[derive(Clone)]
pub struct Dft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dft2({}×{})", self.h, self.w)
    }
}

impl Dft2 {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!("zero-sized DFT grid {h}×{w}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
            scale: 1.0 / ((h * w) as f64).sqrt(),
        })
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    /// In-place transform of a row-major H×W buffer.
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) {
        debug_assert_eq!(buf.len(), self.h * self.w);
        let (row, col) = match dir {
            Direction::Forward => (&self.row_fwd, &self.col_fwd),
            Direction::Inverse => (&self.row_inv, &self.col_inv),
        };
        row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                column[y] = buf[y * self.w + x];
            }
            col.process(&mut column);
            for y in 0..self.h {
                buf[y * self.w + x] = column[y];
            }
        }
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

/// Orthonormal 2-D DFT of an H×W complex image (1/√(HW) both ways).
pub fn unitary_dft2(
    input: &[Complex64],
    h: usize,
    w: usize,
    dir: Direction,
) -> Result<Vec<Complex64>> {
    if input.len() != h * w {
        return Err(Error::shape(
            "unitary_dft2",
            format!("{} values for a {h}×{w} grid", input.len()),
        ));
    }
    let plan = Dft2::new(h, w)?;
    let mut buf = input.to_vec();
    plan.process(&mut buf, dir);
    Ok(buf)
}

/// Real-input convenience wrapper around [`unitary_dft2`].
pub fn unitary_dft2_real(input: &[f64], h: usize, w: usize, dir: Direction) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    unitary_dft2(&c, h, w, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_single_dc_coefficient() {
        let (h, w, c) = (8, 4, 0.7);
        let k = unitary_dft2_real(&vec![c; h * w], h, w, Direction::Forward).unwrap();
        assert!((k[0].re - c * ((h * w) as f64).sqrt()).abs() < 1e-12);
        assert!(k[0].im.abs() < 1e-12);
        assert!(k[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn zero_sized_grid_is_an_error() {
        assert!(unitary_dft2(&[], 0, 4, Direction::Forward).is_err());
    }

    #[test]
    fn non_power_of_two_round_trip() {
        let (h, w) = (6, 5);
        let x: Vec<Complex64> = (0..h * w)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let k = unitary_dft2(&x, h, w, Direction::Forward).unwrap();
        let back = unitary_dft2(&k, h, w, Direction::Inverse).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
