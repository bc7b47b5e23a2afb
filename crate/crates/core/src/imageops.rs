//! Plain (non-differentiable) image math on `(C, H, W)` float arrays.
//!
//! Images everywhere in this crate are channel-first `Array3<f64>` with
//! values in `[0, 1]`. The differentiable counterparts of these routines
//! live in [`crate::autodiff`]; the ones here are used for data
//! preparation, rendering and as independent oracles in tests.

use ndarray::{Array2, Array3, ArrayView3};

/// How blur treats pixels outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderMode {
    /// Out-of-range taps contribute zero (kernel mass is lost at borders).
    Zero,
    /// The kernel is renormalized over in-range taps (no border dimming).
    Renormalize,
}

/// 1-D Gaussian kernel with radius `ceil(3 sigma)`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "gaussian_kernel requires sigma > 0");
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for w in &mut k {
        *w /= sum;
    }
    k
}

pub(crate) fn convolve_axis(
    src: &Array2<f64>,
    kernel: &[f64],
    axis_is_rows: bool,
    border: BorderMode,
) -> Array2<f64> {
    let (h, w) = src.dim();
    let radius = (kernel.len() / 2) as i64;
    let mut out = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            let mut mass = 0.0;
            for (ki, &kw) in kernel.iter().enumerate() {
                let off = ki as i64 - radius;
                let (si, sj) = if axis_is_rows {
                    (i as i64 + off, j as i64)
                } else {
                    (i as i64, j as i64 + off)
                };
                if si >= 0 && si < h as i64 && sj >= 0 && sj < w as i64 {
                    acc += kw * src[(si as usize, sj as usize)];
                    mass += kw;
                }
            }
            out[(i, j)] = match border {
                BorderMode::Zero => acc,
                BorderMode::Renormalize => {
                    if mass > 0.0 {
                        acc / mass
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    out
}

/// Separable Gaussian blur of a `(C, H, W)` image. `sigma == 0` is identity.
pub fn gaussian_blur(image: &ArrayView3<f64>, sigma: f64, border: BorderMode) -> Array3<f64> {
    if sigma <= 0.0 {
        return image.to_owned();
    }
    let kernel = gaussian_kernel(sigma);
    let (c, h, w) = image.dim();
    let mut out = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        let plane = image.index_axis(ndarray::Axis(0), ch).to_owned();
        let pass1 = convolve_axis(&plane, &kernel, true, border);
        let pass2 = convolve_axis(&pass1, &kernel, false, border);
        out.index_axis_mut(ndarray::Axis(0), ch).assign(&pass2);
    }
    out
}

/// Bilinear resize of a `(C, H, W)` image to `(C, out_h, out_w)`.
///
/// Uses the half-pixel-center convention: destination pixel centers map to
/// `src = (dst + 0.5) * scale - 0.5`, with border clamping.
pub fn resize_bilinear(image: &ArrayView3<f64>, out_h: usize, out_w: usize) -> Array3<f64> {
    let (c, h, w) = image.dim();
    assert!(out_h >= 1 && out_w >= 1 && h >= 1 && w >= 1);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let mut out = Array3::<f64>::zeros((c, out_h, out_w));
    for oy in 0..out_h {
        let gy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = gy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = gy - y0 as f64;
        for ox in 0..out_w {
            let gx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = gx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = gx - x0 as f64;
            for ch in 0..c {
                let v00 = image[(ch, y0, x0)];
                let v01 = image[(ch, y0, x1)];
                let v10 = image[(ch, y1, x0)];
                let v11 = image[(ch, y1, x1)];
                let top = v00 + (v01 - v00) * fx;
                let bot = v10 + (v11 - v10) * fx;
                out[(ch, oy, ox)] = top + (bot - top) * fy;
            }
        }
    }
    out
}

/// Copy the integer window `[y0, y0+h) x [x0, x0+w)` out of a `(C, H, W)` image.
pub fn crop(image: &ArrayView3<f64>, y0: usize, x0: usize, h: usize, w: usize) -> Array3<f64> {
    let (c, ih, iw) = image.dim();
    assert!(y0 + h <= ih && x0 + w <= iw, "crop window out of bounds");
    let mut out = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch, y, x)] = image[(ch, y0 + y, x0 + x)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.5);
        let sum: f64 = k.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let n = k.len();
        for i in 0..n / 2 {
            assert!((k[i] - k[n - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn blur_preserves_constant_image_with_renormalize() {
        let img = Array3::<f64>::from_elem((1, 5, 7), 0.42);
        let out = gaussian_blur(&img.view(), 1.0, BorderMode::Renormalize);
        for v in out.iter() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_identity_when_same_size() {
        let img = array![[[0.1, 0.2], [0.3, 0.4]]];
        let out = resize_bilinear(&img.view(), 2, 2);
        assert_eq!(img, out);
    }

    #[test]
    fn crop_extracts_window() {
        let mut img = Array3::<f64>::zeros((1, 4, 4));
        img[(0, 2, 3)] = 1.0;
        let out = crop(&img.view(), 2, 2, 2, 2);
        assert_eq!(out[(0, 0, 1)], 1.0);
        assert_eq!(out.dim(), (1, 2, 2));
    }
}
