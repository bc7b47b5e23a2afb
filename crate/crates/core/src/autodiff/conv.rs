//! 2-D convolution (im2col + GEMM) and separable Gaussian blur for the tape.
//!
//! Convention: images are `(C, H, W)`, weights `(C_out, C_in, k, k)`,
//! square kernels, symmetric zero padding, output height
//! `(H + 2 pad - k) / stride + 1` (floor).

use super::{acc, NodeMeta, Op, Tensor};
use crate::imageops::{convolve_axis, BorderMode};
use ndarray::{Array2, Array3, ArrayD, ArrayView3};

pub(super) struct Conv2dRecord {
    pub input: usize,
    pub weight: usize,
    pub bias: usize,
    pub stride: usize,
    pub pad: usize,
    /// im2col matrix saved from the forward pass, (C_in k k, Ho Wo).
    pub cols: Array2<f64>,
}

fn im2col(input: &ArrayView3<f64>, k: usize, stride: usize, pad: usize) -> (Array2<f64>, usize, usize) {
    let (c_in, h, w) = input.dim();
    assert!(h + 2 * pad >= k && w + 2 * pad >= k, "kernel larger than padded input");
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut cols = Array2::<f64>::zeros((c_in * k * k, ho * wo));
    for ci in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        cols[(row, oy * wo + ox)] = input[(ci, iy as usize, ix as usize)];
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

fn col2im(
    g_cols: &Array2<f64>,
    in_shape: (usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Array3<f64> {
    let (c_in, h, w) = in_shape;
    let mut out = Array3::<f64>::zeros((c_in, h, w));
    for ci in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        out[(ci, iy as usize, ix as usize)] += g_cols[(row, oy * wo + ox)];
                    }
                }
            }
        }
    }
    out
}

pub(super) fn conv2d<'t>(
    input: Tensor<'t>,
    weight: Tensor<'t>,
    bias: Tensor<'t>,
    stride: usize,
    pad: usize,
) -> Tensor<'t> {
    assert!(stride >= 1, "conv2d stride must be >= 1");
    let (value, cols) = input.with_value(|iv| {
        weight.with_value(|wv| {
            bias.with_value(|bv| {
                let i3 = iv.view().into_dimensionality::<ndarray::Ix3>().unwrap();
                let w4 = wv.view().into_dimensionality::<ndarray::Ix4>().unwrap();
                let (c_out, c_in, k, k2) = w4.dim();
                assert_eq!(k, k2, "conv2d expects square kernels");
                assert_eq!(c_in, i3.dim().0, "conv2d channel mismatch");
                assert_eq!(bv.len(), c_out, "conv2d bias length mismatch");
                let (cols, ho, wo) = im2col(&i3, k, stride, pad);
                let wmat = w4
                    .to_owned()
                    .into_shape_with_order((c_out, c_in * k * k))
                    .unwrap();
                let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                let mut out = wmat.dot(&cols);
                for (co, mut row) in out.rows_mut().into_iter().enumerate() {
                    let b = b1[co];
                    row.mapv_inplace(|x| x + b);
                }
                let out3 = out.into_shape_with_order((c_out, ho, wo)).unwrap();
                (out3.into_dyn(), cols)
            })
        })
    });
    let rg = input.tape.requires_grad(input.idx)
        || weight.tape.requires_grad(weight.idx)
        || bias.tape.requires_grad(bias.idx);
    input.tape.push(
        value,
        Op::Conv2d(Conv2dRecord {
            input: input.idx,
            weight: weight.idx,
            bias: bias.idx,
            stride,
            pad,
            cols,
        }),
        rg,
    )
}

pub(super) fn conv2d_backward(
    rec: &Conv2dRecord,
    g: &ArrayD<f64>,
    values: &[ArrayD<f64>],
    grads: &mut [Option<ArrayD<f64>>],
    meta: &[NodeMeta],
) {
    let g3 = g.view().into_dimensionality::<ndarray::Ix3>().unwrap();
    let (c_out, ho, wo) = g3.dim();
    let g2 = g3
        .to_owned()
        .into_shape_with_order((c_out, ho * wo))
        .unwrap();
    let w4 = values[rec.weight]
        .view()
        .into_dimensionality::<ndarray::Ix4>()
        .unwrap();
    let (_, c_in, k, _) = w4.dim();

    if meta[rec.bias].requires_grad {
        let gb = g2.sum_axis(ndarray::Axis(1));
        acc(grads, meta, rec.bias, gb.into_dyn());
    }
    if meta[rec.weight].requires_grad {
        let gw = g2.dot(&rec.cols.t());
        let gw4 = gw.into_shape_with_order((c_out, c_in, k, k)).unwrap();
        acc(grads, meta, rec.weight, gw4.into_dyn());
    }
    if meta[rec.input].requires_grad {
        let wmat = w4
            .to_owned()
            .into_shape_with_order((c_out, c_in * k * k))
            .unwrap();
        let g_cols = wmat.t().dot(&g2);
        let ishape = values[rec.input].shape();
        let g_in = col2im(
            &g_cols,
            (ishape[0], ishape[1], ishape[2]),
            k,
            rec.stride,
            rec.pad,
            ho,
            wo,
        );
        acc(grads, meta, rec.input, g_in.into_dyn());
    }
}

/// Separable blur with zero borders, per channel. Shared by the forward op
/// and (because the kernel is symmetric) its backward rule.
pub(super) fn blur_forward(a: &ArrayView3<f64>, kernel: &[f64]) -> Array3<f64> {
    let (c, h, w) = a.dim();
    let mut out = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        let plane = a.index_axis(ndarray::Axis(0), ch).to_owned();
        let pass1 = convolve_axis(&plane, kernel, true, BorderMode::Zero);
        let pass2 = convolve_axis(&pass1, kernel, false, BorderMode::Zero);
        out.index_axis_mut(ndarray::Axis(0), ch).assign(&pass2);
    }
    out
}
