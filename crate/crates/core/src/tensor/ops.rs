//! Value-level kernels shared by the tape's forward and backward rules.

use super::Tensor;
use crate::error::{Error, Result};

/// ln(1 + e^z) without overflow for large z.
pub fn softplus_value(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function, the derivative of softplus.
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Subgradient of |t| with 0 at t = 0.
pub(crate) fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) struct ConvGeometry {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
}

pub(crate) fn conv_geometry(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<ConvGeometry> {
    let (cin, h, w) = input.chw("conv2d")?;
    let (cout, kcin, kh, kw) = match kernel.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(Error::shape(
                "conv2d",
                format!("kernel must be Cout×Cin×kh×kw, got {:?}", kernel.shape()),
            ))
        }
    };
    if kcin != cin {
        return Err(Error::shape(
            "conv2d",
            format!("input has {cin} channels, kernel expects {kcin}"),
        ));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::shape(
            "conv2d",
            format!("kernel extents must be odd, got {kh}×{kw}"),
        ));
    }
    if bias.shape() != [cout] {
        return Err(Error::shape(
            "conv2d",
            format!("bias must have shape [{cout}], got {:?}", bias.shape()),
        ));
    }
    Ok(ConvGeometry {
        cin,
        cout,
        h,
        w,
        kh,
        kw,
    })
}

/// Valid output/input index ranges for kernel tap offset `d` (already
/// shifted by the padding) over an axis of length `n`.
#[inline]
fn tap_range(d: isize, n: usize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).min(n as isize).max(0) as usize;
    (lo, hi.max(lo))
}

/// Same-padded, stride-1 cross-correlation with per-channel bias.
pub fn conv2d_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let g = conv_geometry(input, kernel, bias)?;
    let (ph, pw) = ((g.kh / 2) as isize, (g.kw / 2) as isize);
    let hw = g.h * g.w;
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0; g.cout * hw];
    for co in 0..g.cout {
        let out_c = &mut out[co * hw..(co + 1) * hw];
        out_c.fill(bias.data()[co]);
        for ci in 0..g.cin {
            let in_c = &x[ci * hw..(ci + 1) * hw];
            for ky in 0..g.kh {
                let dy = ky as isize - ph;
                let (y0, y1) = tap_range(dy, g.h);
                for kx in 0..g.kw {
                    let wt = k[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                    if wt == 0.0 {
                        continue;
                    }
                    let dx = kx as isize - pw;
                    let (x0, x1) = tap_range(dx, g.w);
                    for y in y0..y1 {
                        let src_row = (y as isize + dy) as usize * g.w;
                        let dst = &mut out_c[y * g.w + x0..y * g.w + x1];
                        let src = &in_c[(src_row as isize + x0 as isize + dx) as usize
                            ..(src_row as isize + x1 as isize + dx) as usize];
                        for (o, s) in dst.iter_mut().zip(src) {
                            *o += wt * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.cout, g.h, g.w], out)
}

/// Gradients of a same-padded convolution w.r.t. input, kernel and bias.
pub(crate) fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = conv_geometry(input, kernel, bias)?;
    let (ph, pw) = ((g.kh / 2) as isize, (g.kw / 2) as isize);
    let hw = g.h * g.w;
    let x = input.data();
    let k = kernel.data();
    let go = grad_out.data();
    let mut gin = vec![0.0; g.cin * hw];
    let mut gk = vec![0.0; kernel.len()];
    let mut gb = vec![0.0; g.cout];
    for co in 0..g.cout {
        let go_c = &go[co * hw..(co + 1) * hw];
        gb[co] = go_c.iter().sum();
        for ci in 0..g.cin {
            let in_c = &x[ci * hw..(ci + 1) * hw];
            let gin_c = &mut gin[ci * hw..(ci + 1) * hw];
            for ky in 0..g.kh {
                let dy = ky as isize - ph;
                let (y0, y1) = tap_range(dy, g.h);
                for kx in 0..g.kw {
                    let widx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
                    let wt = k[widx];
                    let dx = kx as isize - pw;
                    let (x0, x1) = tap_range(dx, g.w);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let src_off = ((y as isize + dy) as usize * g.w) as isize + dx;
                        let gsl = &go_c[y * g.w + x0..y * g.w + x1];
                        let lo = (src_off + x0 as isize) as usize;
                        let hi = (src_off + x1 as isize) as usize;
                        for (gv, s) in gsl.iter().zip(&in_c[lo..hi]) {
                            acc += gv * s;
                        }
                        for (gi, gv) in gin_c[lo..hi].iter_mut().zip(gsl) {
                            *gi += wt * gv;
                        }
                    }
                    gk[widx] = acc;
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape().to_vec(), gin)?,
        Tensor::new(kernel.shape().to_vec(), gk)?,
        Tensor::new(vec![g.cout], gb)?,
    ))
}

pub(crate) fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat_channels", "no parts"))?;
    let (_, h, w) = first.chw("concat_channels")?;
    let mut channels = 0;
    for p in parts {
        let (c, ph, pw) = p.chw("concat_channels")?;
        if (ph, pw) != (h, w) {
            return Err(Error::shape(
                "concat_channels",
                format!("spatial extents {ph}×{pw} differ from {h}×{w}"),
            ));
        }
        channels += c;
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![channels, h, w], data)
}

pub(crate) fn slice_channels(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let (c, h, w) = x.chw("slice_channels")?;
    if len == 0 || start + len > c {
        return Err(Error::shape(
            "slice_channels",
            format!("range {start}..{} out of {c} channels", start + len),
        ));
    }
    let hw = h * w;
    Tensor::new(
        vec![len, h, w],
        x.data()[start * hw..(start + len) * hw].to_vec(),
    )
}
