//! Minimal reverse-mode automatic differentiation on `ndarray` tensors.
//!
//! A [`Tape`] records every operation as it executes; calling
//! [`Tensor::backward`] on a scalar walks the record in reverse and
//! accumulates exact gradients for every tensor created with
//! [`Tape::var`]. The op set is deliberately small: it is exactly what the
//! patch attack pipeline needs (dense layers, convolutions, bilinear patch
//! warps, masked compositing, the loss terms) and nothing more.
//!
//! Values are `f64` throughout so finite-difference gradient checks can be
//! tight.

mod conv;
mod warp;

pub use warp::WarpPlan;

use ndarray::{ArrayD, Axis, IxDyn, Slice};
use std::cell::RefCell;
use std::rc::Rc;

/// Operation record. Each variant stores the indices of its inputs plus
/// whatever forward-pass data its backward rule needs.
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize, f64),
    /// Elementwise multiply by a constant array (no gradient into the constant).
    MulConst(usize, ArrayD<f64>),
    /// (N, K) x (K, M) matrix product.
    Matmul(usize, usize),
    /// (N, M) + (M,) broadcast over rows.
    AddRowBias(usize, usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Sum(usize),
    Mean(usize),
    Reshape(usize),
    Permute(usize, Vec<usize>),
    /// Select along an axis: `narrow(axis, start, len)`.
    Narrow {
        input: usize,
        axis: usize,
        start: usize,
        len: usize,
    },
    /// Gather elements of a 1-D tensor at the stored indices.
    Gather1d(usize, Vec<usize>),
    /// Concatenate 1-D tensors.
    Concat1d(Vec<usize>),
    Clamp01(usize),
    /// Elementwise binary cross-entropy against constant targets, from logits.
    BceWithLogits(usize, ArrayD<f64>),
    Conv2d(conv::Conv2dRecord),
    GaussianBlur {
        input: usize,
        kernel: Vec<f64>,
    },
    /// Bilinear affine warp of a square patch onto a canvas.
    Warp {
        patch: usize,
        plan: Rc<WarpPlan>,
    },
    /// Masked blend: output = mask ? canvas : base, with `base` constant.
    MaskBlend {
        canvas: usize,
        base: ArrayD<f64>,
        mask: ArrayD<f64>,
    },
    /// Anisotropic total variation of a (C, H, W) tensor, summed to a scalar.
    TvLoss(usize),
}

struct NodeMeta {
    op: Op,
    requires_grad: bool,
}

/// Records operations for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    values: RefCell<Vec<ArrayD<f64>>>,
    meta: RefCell<Vec<NodeMeta>>,
    grads: RefCell<Vec<Option<ArrayD<f64>>>>,
}

/// Handle to a node on a [`Tape`]. Cheap to copy.
#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, value: ArrayD<f64>, op: Op, requires_grad: bool) -> Tensor<'_> {
        let mut values = self.values.borrow_mut();
        let mut meta = self.meta.borrow_mut();
        values.push(value);
        meta.push(NodeMeta { op, requires_grad });
        self.grads.borrow_mut().push(None);
        Tensor {
            tape: self,
            idx: values.len() - 1,
        }
    }

    /// A tensor that participates in differentiation.
    pub fn var(&self, value: ArrayD<f64>) -> Tensor<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A tensor treated as a constant (no gradient is accumulated for it).
    pub fn constant(&self, value: ArrayD<f64>) -> Tensor<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// Scalar constant convenience.
    pub fn scalar(&self, v: f64) -> Tensor<'_> {
        self.constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    fn requires_grad(&self, idx: usize) -> bool {
        self.meta.borrow()[idx].requires_grad
    }

    /// Number of recorded nodes (test/diagnostic use).
    pub fn len(&self) -> usize {
        self.values.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn same_tape(a: &Tensor<'_>, b: &Tensor<'_>) {
    assert!(
        std::ptr::eq(a.tape, b.tape),
        "tensors belong to different tapes"
    );
}

impl<'t> Tensor<'t> {
    pub fn value(&self) -> ArrayD<f64> {
        self.tape.values.borrow()[self.idx].clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.values.borrow()[self.idx].shape().to_vec()
    }

    /// Scalar value of a 0-d or single-element tensor.
    pub fn scalar_value(&self) -> f64 {
        let values = self.tape.values.borrow();
        let v = &values[self.idx];
        assert_eq!(v.len(), 1, "scalar_value on non-scalar tensor");
        *v.iter().next().unwrap()
    }

    /// Gradient accumulated by the last `backward` call, if any.
    pub fn grad(&self) -> Option<ArrayD<f64>> {
        self.tape.grads.borrow()[self.idx].clone()
    }

    fn with_value<R>(&self, f: impl FnOnce(&ArrayD<f64>) -> R) -> R {
        let values = self.tape.values.borrow();
        f(&values[self.idx])
    }

    fn unary(&self, value: ArrayD<f64>, op: Op) -> Tensor<'t> {
        let rg = self.tape.requires_grad(self.idx);
        self.tape.push(value, op, rg)
    }

    pub fn add(&self, other: Tensor<'t>) -> Tensor<'t> {
        same_tape(self, &other);
        let v = self.with_value(|a| other.with_value(|b| a + b));
        let rg = self.tape.requires_grad(self.idx) || self.tape.requires_grad(other.idx);
        self.tape.push(v, Op::Add(self.idx, other.idx), rg)
    }

    pub fn sub(&self, other: Tensor<'t>) -> Tensor<'t> {
        same_tape(self, &other);
        let v = self.with_value(|a| other.with_value(|b| a - b));
        let rg = self.tape.requires_grad(self.idx) || self.tape.requires_grad(other.idx);
        self.tape.push(v, Op::Sub(self.idx, other.idx), rg)
    }

    pub fn mul(&self, other: Tensor<'t>) -> Tensor<'t> {
        same_tape(self, &other);
        let v = self.with_value(|a| other.with_value(|b| a * b));
        let rg = self.tape.requires_grad(self.idx) || self.tape.requires_grad(other.idx);
        self.tape.push(v, Op::Mul(self.idx, other.idx), rg)
    }

    pub fn neg(&self) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| -x));
        self.unary(v, Op::Neg(self.idx))
    }

    pub fn scale(&self, c: f64) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| c * x));
        self.unary(v, Op::Scale(self.idx, c))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| x + c));
        self.unary(v, Op::AddScalar(self.idx, c))
    }

    /// Elementwise product with a constant array of identical shape.
    pub fn mul_const(&self, c: &ArrayD<f64>) -> Tensor<'t> {
        let v = self.with_value(|a| {
            assert_eq!(a.shape(), c.shape(), "mul_const shape mismatch");
            a * c
        });
        self.unary(v, Op::MulConst(self.idx, c.clone()))
    }

    /// Matrix product of a (N, K) tensor with a (K, M) tensor.
    pub fn matmul(&self, other: Tensor<'t>) -> Tensor<'t> {
        same_tape(self, &other);
        let v = self.with_value(|a| {
            other.with_value(|b| {
                let a2 = a.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let b2 = b.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                a2.dot(&b2).into_dyn()
            })
        });
        let rg = self.tape.requires_grad(self.idx) || self.tape.requires_grad(other.idx);
        self.tape.push(v, Op::Matmul(self.idx, other.idx), rg)
    }

    /// Add a (M,) bias to every row of a (N, M) tensor.
    pub fn add_row_bias(&self, bias: Tensor<'t>) -> Tensor<'t> {
        same_tape(self, &bias);
        let v = self.with_value(|a| {
            bias.with_value(|b| {
                let a2 = a.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let b1 = b.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                (&a2 + &b1).into_dyn()
            })
        });
        let rg = self.tape.requires_grad(self.idx) || self.tape.requires_grad(bias.idx);
        self.tape.push(v, Op::AddRowBias(self.idx, bias.idx), rg)
    }

    pub fn relu(&self) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| x.max(0.0)));
        self.unary(v, Op::Relu(self.idx))
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| if x > 0.0 { x } else { slope * x }));
        self.unary(v, Op::LeakyRelu(self.idx, slope))
    }

    pub fn sigmoid(&self) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(stable_sigmoid));
        self.unary(v, Op::Sigmoid(self.idx))
    }

    pub fn sum(&self) -> Tensor<'t> {
        let v = self.with_value(|a| ArrayD::from_elem(IxDyn(&[]), a.sum()));
        self.unary(v, Op::Sum(self.idx))
    }

    pub fn mean(&self) -> Tensor<'t> {
        let v = self.with_value(|a| {
            assert!(a.len() > 0, "mean of empty tensor");
            ArrayD::from_elem(IxDyn(&[]), a.sum() / a.len() as f64)
        });
        self.unary(v, Op::Mean(self.idx))
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor<'t> {
        let v = self.with_value(|a| {
            a.clone()
                .into_shape_with_order(IxDyn(shape))
                .expect("reshape: incompatible size")
        });
        self.unary(v, Op::Reshape(self.idx))
    }

    pub fn permute(&self, axes: &[usize]) -> Tensor<'t> {
        let v = self.with_value(|a| {
            a.clone()
                .permuted_axes(IxDyn(axes))
                .as_standard_layout()
                .to_owned()
        });
        self.unary(v, Op::Permute(self.idx, axes.to_vec()))
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor<'t> {
        let v = self.with_value(|a| {
            a.slice_axis(Axis(axis), Slice::from(start..start + len))
                .to_owned()
        });
        self.unary(
            v,
            Op::Narrow {
                input: self.idx,
                axis,
                start,
                len,
            },
        )
    }

    /// Gather elements of a 1-D tensor at `indices`.
    pub fn gather1d(&self, indices: &[usize]) -> Tensor<'t> {
        let v = self.with_value(|a| {
            let a1 = a.view().into_dimensionality::<ndarray::Ix1>().unwrap();
            ArrayD::from_shape_vec(
                IxDyn(&[indices.len()]),
                indices.iter().map(|&i| a1[i]).collect(),
            )
            .unwrap()
        });
        self.unary(v, Op::Gather1d(self.idx, indices.to_vec()))
    }

    pub fn clamp01(&self) -> Tensor<'t> {
        let v = self.with_value(|a| a.mapv(|x| x.clamp(0.0, 1.0)));
        self.unary(v, Op::Clamp01(self.idx))
    }

    /// Elementwise binary cross-entropy from logits against constant targets.
    pub fn bce_with_logits(&self, targets: &ArrayD<f64>) -> Tensor<'t> {
        let v = self.with_value(|a| {
            assert_eq!(a.shape(), targets.shape(), "bce target shape mismatch");
            let mut out = a.clone();
            out.zip_mut_with(targets, |x, &t| {
                *x = x.max(0.0) - *x * t + (-(x.abs())).exp().ln_1p();
            });
            out
        });
        self.unary(v, Op::BceWithLogits(self.idx, targets.clone()))
    }

    /// Total variation of a (C, H, W) tensor (see `losses::tv_loss` for the
    /// exact convention).
    pub fn tv(&self) -> Tensor<'t> {
        let v = self.with_value(|a| {
            let a3 = a.view().into_dimensionality::<ndarray::Ix3>().unwrap();
            ArrayD::from_elem(IxDyn(&[]), tv_forward(&a3))
        });
        self.unary(v, Op::TvLoss(self.idx))
    }

    /// 2-D convolution; see [`conv`] for conventions.
    pub fn conv2d(&self, weight: Tensor<'t>, bias: Tensor<'t>, stride: usize, pad: usize) -> Tensor<'t> {
        conv::conv2d(*self, weight, bias, stride, pad)
    }

    /// Separable Gaussian blur with zero-padded borders. `sigma == 0` is a no-op.
    pub fn gaussian_blur(&self, sigma: f64) -> Tensor<'t> {
        if sigma <= 0.0 {
            return *self;
        }
        let kernel = crate::imageops::gaussian_kernel(sigma);
        let v = self.with_value(|a| {
            let a3 = a.view().into_dimensionality::<ndarray::Ix3>().unwrap();
            conv::blur_forward(&a3, &kernel).into_dyn()
        });
        self.unary(
            v,
            Op::GaussianBlur {
                input: self.idx,
                kernel,
            },
        )
    }

    /// Render this square patch tensor onto a canvas through a [`WarpPlan`].
    pub fn warp(&self, plan: &Rc<WarpPlan>) -> Tensor<'t> {
        let v = self.with_value(|a| {
            let a3 = a.view().into_dimensionality::<ndarray::Ix3>().unwrap();
            plan.apply(&a3).into_dyn()
        });
        self.unary(
            v,
            Op::Warp {
                patch: self.idx,
                plan: Rc::clone(plan),
            },
        )
    }

    /// Masked blend with a constant base image: `mask ? self : base`.
    ///
    /// `mask` must be binary and is broadcast across channels when it has
    /// shape (1, H, W) and the canvas (C, H, W).
    pub fn mask_blend(&self, base: &ArrayD<f64>, mask: &ArrayD<f64>) -> Tensor<'t> {
        let v = self.with_value(|canvas| {
            assert_eq!(canvas.shape(), base.shape(), "mask_blend base shape mismatch");
            let mut out = base.clone();
            blend_select(&mut out, canvas, mask);
            out
        });
        self.unary(
            v,
            Op::MaskBlend {
                canvas: self.idx,
                base: base.clone(),
                mask: mask.clone(),
            },
        )
    }

    /// Reverse-mode sweep from this scalar. Gradients of `var` tensors are
    /// afterwards available through [`Tensor::grad`].
    pub fn backward(&self) {
        let meta = self.tape.meta.borrow();
        let values = self.tape.values.borrow();
        let mut grads = self.tape.grads.borrow_mut();
        for g in grads.iter_mut() {
            *g = None;
        }
        assert_eq!(
            values[self.idx].len(),
            1,
            "backward requires a scalar loss"
        );
        grads[self.idx] = Some(ArrayD::from_elem(values[self.idx].raw_dim(), 1.0));

        for i in (0..=self.idx).rev() {
            if grads[i].is_none() || !meta[i].requires_grad {
                continue;
            }
            let g = grads[i].clone().unwrap();
            backprop_step(&meta[i].op, &g, &values, &mut grads, &meta);
        }
    }
}

/// Concatenate 1-D tensors into one 1-D tensor.
pub fn concat1d<'t>(tape: &'t Tape, parts: &[Tensor<'t>]) -> Tensor<'t> {
    assert!(!parts.is_empty(), "concat1d of zero tensors");
    let mut data = Vec::new();
    let mut rg = false;
    for p in parts {
        same_tape(&parts[0], p);
        p.with_value(|v| data.extend(v.iter().copied()));
        rg |= tape.requires_grad(p.idx);
    }
    let v = ArrayD::from_shape_vec(IxDyn(&[data.len()]), data).unwrap();
    tape.push(v, Op::Concat1d(parts.iter().map(|p| p.idx).collect()), rg)
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward total variation; shared with the backward rule below.
fn tv_forward(a: &ndarray::ArrayView3<f64>) -> f64 {
    let (c, h, w) = a.dim();
    let mut total = 0.0;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let dv = if i + 1 < h { a[(ch, i, j)] - a[(ch, i + 1, j)] } else { 0.0 };
                let dh = if j + 1 < w { a[(ch, i, j)] - a[(ch, i, j + 1)] } else { 0.0 };
                total += (dv * dv + dh * dh).sqrt();
            }
        }
    }
    total
}

fn blend_select(out: &mut ArrayD<f64>, canvas: &ArrayD<f64>, mask: &ArrayD<f64>) {
    let c = out.shape()[0];
    let mask_c = mask.shape()[0];
    assert!(
        mask_c == c || mask_c == 1,
        "mask channels must be 1 or match the image"
    );
    let (h, w) = (out.shape()[1], out.shape()[2]);
    assert_eq!(&mask.shape()[1..], &[h, w], "mask spatial shape mismatch");
    for ch in 0..c {
        let mch = if mask_c == 1 { 0 } else { ch };
        for y in 0..h {
            for x in 0..w {
                if mask[[mch, y, x]] != 0.0 {
                    out[[ch, y, x]] = canvas[[ch, y, x]];
                }
            }
        }
    }
}

fn acc(grads: &mut [Option<ArrayD<f64>>], meta: &[NodeMeta], idx: usize, delta: ArrayD<f64>) {
    if !meta[idx].requires_grad {
        return;
    }
    match &mut grads[idx] {
        Some(g) => *g += &delta,
        slot @ None => *slot = Some(delta),
    }
}

fn backprop_step(
    op: &Op,
    g: &ArrayD<f64>,
    values: &[ArrayD<f64>],
    grads: &mut [Option<ArrayD<f64>>],
    meta: &[NodeMeta],
) {
    match op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            acc(grads, meta, *a, g.clone());
            acc(grads, meta, *b, g.clone());
        }
        Op::Sub(a, b) => {
            acc(grads, meta, *a, g.clone());
            acc(grads, meta, *b, g.mapv(|x| -x));
        }
        Op::Mul(a, b) => {
            acc(grads, meta, *a, g * &values[*b]);
            acc(grads, meta, *b, g * &values[*a]);
        }
        Op::Neg(a) => acc(grads, meta, *a, g.mapv(|x| -x)),
        Op::Scale(a, c) => acc(grads, meta, *a, g.mapv(|x| c * x)),
        Op::AddScalar(a, _) => acc(grads, meta, *a, g.clone()),
        Op::MulConst(a, c) => acc(grads, meta, *a, g * c),
        Op::Matmul(a, b) => {
            let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let av = values[*a].view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let bv = values[*b].view().into_dimensionality::<ndarray::Ix2>().unwrap();
            if meta[*a].requires_grad {
                acc(grads, meta, *a, g2.dot(&bv.t()).into_dyn());
            }
            if meta[*b].requires_grad {
                acc(grads, meta, *b, av.t().dot(&g2).into_dyn());
            }
        }
        Op::AddRowBias(a, b) => {
            acc(grads, meta, *a, g.clone());
            if meta[*b].requires_grad {
                let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                acc(grads, meta, *b, g2.sum_axis(Axis(0)).into_dyn());
            }
        }
        Op::Relu(a) => {
            let mut d = g.clone();
            d.zip_mut_with(&values[*a], |gv, &x| {
                if x <= 0.0 {
                    *gv = 0.0;
                }
            });
            acc(grads, meta, *a, d);
        }
        Op::LeakyRelu(a, slope) => {
            let mut d = g.clone();
            d.zip_mut_with(&values[*a], |gv, &x| {
                if x <= 0.0 {
                    *gv *= slope;
                }
            });
            acc(grads, meta, *a, d);
        }
        Op::Sigmoid(a) => {
            // d sigma = sigma (1 - sigma), recomputed from the input.
            let mut d = g.clone();
            d.zip_mut_with(&values[*a], |gv, &x| {
                let s = stable_sigmoid(x);
                *gv *= s * (1.0 - s);
            });
            acc(grads, meta, *a, d);
        }
        Op::Sum(a) => {
            let gs = g.iter().next().copied().unwrap();
            acc(grads, meta, *a, ArrayD::from_elem(values[*a].raw_dim(), gs));
        }
        Op::Mean(a) => {
            let gs = g.iter().next().copied().unwrap() / values[*a].len() as f64;
            acc(grads, meta, *a, ArrayD::from_elem(values[*a].raw_dim(), gs));
        }
        Op::Reshape(a) => {
            let d = g
                .clone()
                .into_shape_with_order(values[*a].raw_dim())
                .expect("reshape backward");
            acc(grads, meta, *a, d);
        }
        Op::Permute(a, axes) => {
            let mut inverse = vec![0usize; axes.len()];
            for (i, &ax) in axes.iter().enumerate() {
                inverse[ax] = i;
            }
            let d = g
                .clone()
                .permuted_axes(IxDyn(&inverse))
                .as_standard_layout()
                .to_owned();
            acc(grads, meta, *a, d);
        }
        Op::Narrow {
            input,
            axis,
            start,
            len,
        } => {
            let mut d = ArrayD::zeros(values[*input].raw_dim());
            d.slice_axis_mut(Axis(*axis), Slice::from(*start..*start + *len))
                .assign(g);
            acc(grads, meta, *input, d);
        }
        Op::Gather1d(a, indices) => {
            let mut d = ArrayD::zeros(values[*a].raw_dim());
            {
                let mut d1 = d.view_mut().into_dimensionality::<ndarray::Ix1>().unwrap();
                let g1 = g.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                for (k, &i) in indices.iter().enumerate() {
                    d1[i] += g1[k];
                }
            }
            acc(grads, meta, *a, d);
        }
        Op::Concat1d(parts) => {
            let g1 = g.view().into_dimensionality::<ndarray::Ix1>().unwrap();
            let mut offset = 0;
            for &p in parts {
                let n = values[p].len();
                let d = ArrayD::from_shape_vec(
                    IxDyn(&[n]),
                    g1.slice(ndarray::s![offset..offset + n]).to_vec(),
                )
                .unwrap();
                offset += n;
                acc(grads, meta, p, d);
            }
        }
        Op::Clamp01(a) => {
            let mut d = g.clone();
            d.zip_mut_with(&values[*a], |gv, &x| {
                if !(0.0..=1.0).contains(&x) {
                    *gv = 0.0;
                }
            });
            acc(grads, meta, *a, d);
        }
        Op::BceWithLogits(a, targets) => {
            let mut d = g.clone();
            ndarray::Zip::from(&mut d)
                .and(&values[*a])
                .and(targets)
                .for_each(|gv, &x, &t| {
                    *gv *= stable_sigmoid(x) - t;
                });
            acc(grads, meta, *a, d);
        }
        Op::Conv2d(rec) => conv::conv2d_backward(rec, g, values, grads, meta),
        Op::GaussianBlur { input, kernel } => {
            // The blur kernel is symmetric and zero-padded, so the adjoint
            // is the same blur applied to the upstream gradient.
            let g3 = g.view().into_dimensionality::<ndarray::Ix3>().unwrap();
            let d = conv::blur_forward(&g3, kernel).into_dyn();
            acc(grads, meta, *input, d);
        }
        Op::Warp { patch, plan } => {
            let g3 = g.view().into_dimensionality::<ndarray::Ix3>().unwrap();
            let d = plan.backward(&g3).into_dyn();
            acc(grads, meta, *patch, d);
        }
        Op::MaskBlend { canvas, base: _, mask } => {
            let mut d = g.clone();
            let c = d.shape()[0];
            let mask_c = mask.shape()[0];
            let (h, w) = (d.shape()[1], d.shape()[2]);
            for ch in 0..c {
                let mch = if mask_c == 1 { 0 } else { ch };
                for y in 0..h {
                    for x in 0..w {
                        if mask[[mch, y, x]] == 0.0 {
                            d[[ch, y, x]] = 0.0;
                        }
                    }
                }
            }
            acc(grads, meta, *canvas, d);
        }
        Op::TvLoss(a) => {
            let gs = g.iter().next().copied().unwrap();
            let av = values[*a].view().into_dimensionality::<ndarray::Ix3>().unwrap();
            let (c, h, w) = av.dim();
            let mut d = ndarray::Array3::<f64>::zeros((c, h, w));
            for ch in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        let dv = if i + 1 < h { av[(ch, i, j)] - av[(ch, i + 1, j)] } else { 0.0 };
                        let dh = if j + 1 < w { av[(ch, i, j)] - av[(ch, i, j + 1)] } else { 0.0 };
                        let r = (dv * dv + dh * dh).sqrt();
                        if r > 0.0 {
                            d[(ch, i, j)] += gs * (dv + dh) / r;
                            if i + 1 < h {
                                d[(ch, i + 1, j)] -= gs * dv / r;
                            }
                            if j + 1 < w {
                                d[(ch, i, j + 1)] -= gs * dh / r;
                            }
                        }
                    }
                }
            }
            acc(grads, meta, *a, d.into_dyn());
        }
    }
}
