use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::ops::{self, logistic, sign0, softplus_value};
use super::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicUsize = AtomicUsize::new(1);

/// A fixed real-linear operator that can sit on the tape. The backward
/// rule is its adjoint.
pub trait LinearMap {
    fn name(&self) -> &'static str;
    fn input_shape(&self) -> Vec<usize>;
    fn output_shape(&self) -> Vec<usize>;
    fn apply(&self, x: &Tensor) -> Tensor;
    fn adjoint(&self, g: &Tensor) -> Tensor;
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// rank-0 tensor times tensor
    Scale { scalar: usize, x: usize },
    MulConst(usize, f64),
    Sum(usize),
    Relu(usize),
    Softplus(usize),
    Conv2d {
        input: usize,
        kernel: usize,
        bias: usize,
    },
    Concat(Vec<usize>),
    Slice {
        x: usize,
        start: usize,
    },
    L1(usize, usize),
    Linear {
        x: usize,
        map: Rc<dyn LinearMap>,
    },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    trainable: bool,
}

/// Define-by-run gradient tape. Records are appended in execution order,
/// so node ids are already a topological order.
pub struct Tape {
    id: usize,
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(tape {}, id {})", self.tape.id, self.id)
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape_id(&self) -> usize {
        self.tape.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        Rc::clone(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    tape_id: usize,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        if var.tape.id != self.tape_id {
            return None;
        }
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but returns a detached-tensor error for
    /// variables of a different tape or without a gradient.
    pub fn expect(&self, var: Var<'_>) -> Result<&Tensor> {
        self.get(var).ok_or(Error::Detached { id: var.id })
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, trainable: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            trainable,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn check(&self, v: Var<'_>) -> Result<Rc<Tensor>> {
        if v.tape.id != self.id {
            return Err(Error::Detached { id: v.id });
        }
        Ok(Rc::clone(&self.nodes.borrow()[v.id].value))
    }

    /// Trainable leaf: receives a gradient on every backward pass.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that only receives a gradient if something depends on it.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn add(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        let out = av.zip_map(&bv, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a.id, b.id), false))
    }

    pub fn sub(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        let out = av.zip_map(&bv, "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a.id, b.id), false))
    }

    pub fn mul(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        let out = av.zip_map(&bv, "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a.id, b.id), false))
    }

    /// `scalar · x` where `scalar` is rank 0.
    pub fn scale(&self, scalar: Var<'_>, x: Var<'_>) -> Result<Var<'_>> {
        let (sv, xv) = (self.check(scalar)?, self.check(x)?);
        if sv.rank() != 0 {
            return Err(Error::shape(
                "scale",
                format!("scalar operand has shape {:?}", sv.shape()),
            ));
        }
        let s = sv.item();
        let out = xv.map(|v| s * v);
        Ok(self.push(
            out,
            Op::Scale {
                scalar: scalar.id,
                x: x.id,
            },
            false,
        ))
    }

    pub fn mul_const(&self, x: Var<'_>, c: f64) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        Ok(self.push(xv.map(|v| c * v), Op::MulConst(x.id, c), false))
    }

    pub fn sum(&self, x: Var<'_>) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        let s = xv.data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(x.id), false))
    }

    pub fn relu(&self, x: Var<'_>) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        Ok(self.push(xv.map(|v| v.max(0.0)), Op::Relu(x.id), false))
    }

    /// Elementwise ln(1 + e^z).
    pub fn softplus(&self, x: Var<'_>) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        Ok(self.push(xv.map(softplus_value), Op::Softplus(x.id), false))
    }

    pub fn conv2d(&self, input: Var<'_>, kernel: Var<'_>, bias: Var<'_>) -> Result<Var<'_>> {
        let (iv, kv, bv) = (self.check(input)?, self.check(kernel)?, self.check(bias)?);
        let out = ops::conv2d_forward(&iv, &kv, &bv)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input: input.id,
                kernel: kernel.id,
                bias: bias.id,
            },
            false,
        ))
    }

    pub fn concat_channels(&self, parts: &[Var<'_>]) -> Result<Var<'_>> {
        let values = parts
            .iter()
            .map(|p| self.check(*p))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = values.iter().map(|v| v.as_ref()).collect();
        let out = ops::concat_channels(&refs)?;
        Ok(self.push(out, Op::Concat(parts.iter().map(|p| p.id).collect()), false))
    }

    pub fn slice_channels(&self, x: Var<'_>, start: usize, len: usize) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        let out = ops::slice_channels(&xv, start, len)?;
        Ok(self.push(out, Op::Slice { x: x.id, start }, false))
    }

    /// Σ |a − b| as a rank-0 tensor.
    pub fn l1_loss(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        av.expect_same_shape(&bv, "l1_loss")?;
        let s = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::L1(a.id, b.id), false))
    }

    pub fn linear(&self, x: Var<'_>, map: Rc<dyn LinearMap>) -> Result<Var<'_>> {
        let xv = self.check(x)?;
        if xv.shape() != map.input_shape().as_slice() {
            return Err(Error::shape(
                map.name(),
                format!("expected {:?}, got {:?}", map.input_shape(), xv.shape()),
            ));
        }
        let out = map.apply(&xv);
        Ok(self.push(out, Op::Linear { x: x.id, map }, false))
    }

    /// Reverse sweep from a rank-0 `loss`. Every trainable leaf ends up
    /// with a gradient (zeros if the loss does not depend on it).
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let lv = self.check(loss)?;
        if lv.rank() != 0 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let val = |i: usize| -> &Tensor { &nodes[i].value };
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, g.zip_map(val(*b), "mul", |gv, y| gv * y)?);
                    accumulate(&mut grads, *b, g.zip_map(val(*a), "mul", |gv, x| gv * x)?);
                }
                Op::Scale { scalar, x } => {
                    let s = val(*scalar).item();
                    accumulate(&mut grads, *scalar, Tensor::scalar(g.dot(val(*x))));
                    accumulate(&mut grads, *x, g.map(|v| s * v));
                }
                Op::MulConst(x, c) => accumulate(&mut grads, *x, g.map(|v| c * v)),
                Op::Sum(x) => {
                    let s = g.item();
                    accumulate(&mut grads, *x, Tensor::filled(val(*x).shape(), s));
                }
                Op::Relu(x) => {
                    let gx = g.zip_map(val(*x), "relu", |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Softplus(x) => {
                    let gx = g.zip_map(val(*x), "softplus", |gv, z| gv * logistic(z))?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                } => {
                    let (gi, gk, gb) =
                        ops::conv2d_backward(val(*input), val(*kernel), val(*bias), &g)?;
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *kernel, gk);
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let c = val(p).shape()[0];
                        accumulate(&mut grads, p, ops::slice_channels(&g, start, c)?);
                        start += c;
                    }
                }
                Op::Slice { x, start } => {
                    let src = val(*x);
                    let (_, h, w) = src.chw("slice_channels")?;
                    let mut gx = Tensor::zeros(src.shape());
                    let off = start * h * w;
                    gx.data_mut()[off..off + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads, *x, gx);
                }
                Op::L1(a, b) => {
                    let s = g.item();
                    let d = val(*a).zip_map(val(*b), "l1_loss", |x, y| s * sign0(x - y))?;
                    accumulate(&mut grads, *b, d.map(|v| -v));
                    accumulate(&mut grads, *a, d);
                }
                Op::Linear { x, map } => accumulate(&mut grads, *x, map.adjoint(&g)),
            }
            grads[id] = Some(g);
        }

        for (id, node) in nodes.iter().enumerate() {
            if node.trainable && grads[id].is_none() {
                grads[id] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients {
            tape_id: self.id,
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
