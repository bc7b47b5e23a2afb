//! Precomputed bilinear sampling plan for pasting a rotated/scaled square
//! patch onto a canvas.
//!
//! The geometry (rotation, scale, placement) is fixed when the plan is
//! built, so the warp is a sparse linear map from patch pixels to canvas
//! pixels: each covered canvas pixel holds up to four weighted taps into
//! the patch. That makes the forward pass shared between the plain
//! compositor and the tape op, and the backward pass an exact transpose.

use crate::error::{Error, Result};
use ndarray::{Array3, ArrayView3};

#[derive(Debug, Clone, Copy)]
struct PixelTaps {
    /// Flat canvas index `y * W + x`.
    out_idx: u32,
    /// Flat patch indices `y * S + x` with bilinear weights.
    taps: [(u32, f64); 4],
}

/// Sparse linear warp from a square `(C, S, S)` patch to a `(C, H, W)` canvas.
#[derive(Debug)]
pub struct WarpPlan {
    canvas_h: usize,
    canvas_w: usize,
    patch_s: usize,
    entries: Vec<PixelTaps>,
    /// Binary mask, shape (1, H, W): 1 exactly on covered pixels.
    mask: Array3<f64>,
}

impl WarpPlan {
    /// Build a plan for a patch of resolution `patch_s`, pasted with its
    /// nominal `side` (pixels) and top-left corner `(px, py)`, rotated by
    /// `rot_deg` (clockwise, about the paste-square center) and scaled by
    /// `scale`.
    ///
    /// Pixels mapping outside the patch extent are uncovered; coverage is
    /// clipped to the canvas. A placement with no covered pixel at all is
    /// an error.
    pub fn build(
        patch_s: usize,
        canvas_h: usize,
        canvas_w: usize,
        px: f64,
        py: f64,
        side: f64,
        rot_deg: f64,
        scale: f64,
    ) -> Result<WarpPlan> {
        if patch_s == 0 || side <= 0.0 || scale <= 0.0 {
            return Err(Error::ParamDomain(format!(
                "warp requires positive patch resolution, side and scale (S={patch_s}, side={side}, scale={scale})"
            )));
        }
        let s_f = patch_s as f64;
        let theta = rot_deg.to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let cx = px + side / 2.0;
        let cy = py + side / 2.0;
        // Canvas pixels-per-patch-pixel after scaling.
        let m = side * scale / s_f;
        // Half-extent of the rotated, scaled square along each canvas axis.
        let ext = (side * scale / 2.0) * (cos_t.abs() + sin_t.abs()) + 1.0;
        let y_lo = ((cy - ext).floor().max(0.0)) as usize;
        let y_hi = ((cy + ext).ceil().min(canvas_h as f64)).max(0.0) as usize;
        let x_lo = ((cx - ext).floor().max(0.0)) as usize;
        let x_hi = ((cx + ext).ceil().min(canvas_w as f64)).max(0.0) as usize;

        let mut entries = Vec::new();
        let mut mask = Array3::<f64>::zeros((1, canvas_h, canvas_w));
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let dx = (x as f64 + 0.5) - cx;
                let dy = (y as f64 + 0.5) - cy;
                // Inverse rotation, then inverse scale, into patch coords.
                let u = (cos_t * dx + sin_t * dy) / m + s_f / 2.0;
                let v = (-sin_t * dx + cos_t * dy) / m + s_f / 2.0;
                if !(0.0..=s_f).contains(&u) || !(0.0..=s_f).contains(&v) {
                    continue;
                }
                let gx = u - 0.5;
                let gy = v - 0.5;
                let x0 = gx.floor();
                let y0 = gy.floor();
                let fx = gx - x0;
                let fy = gy - y0;
                let cl = |i: f64| -> u32 { (i.max(0.0).min(s_f - 1.0)) as u32 };
                let (c00, c01) = (cl(x0), cl(x0 + 1.0));
                let (r00, r01) = (cl(y0), cl(y0 + 1.0));
                let s_u32 = patch_s as u32;
                let taps = [
                    (r00 * s_u32 + c00, (1.0 - fy) * (1.0 - fx)),
                    (r00 * s_u32 + c01, (1.0 - fy) * fx),
                    (r01 * s_u32 + c00, fy * (1.0 - fx)),
                    (r01 * s_u32 + c01, fy * fx),
                ];
                entries.push(PixelTaps {
                    out_idx: (y * canvas_w + x) as u32,
                    taps,
                });
                mask[(0, y, x)] = 1.0;
            }
        }
        if entries.is_empty() {
            return Err(Error::ParamDomain(
                "patch placement does not cover any canvas pixel".into(),
            ));
        }
        Ok(WarpPlan {
            canvas_h,
            canvas_w,
            patch_s,
            entries,
            mask,
        })
    }

    /// Binary coverage mask, shape (1, H, W).
    pub fn mask(&self) -> &Array3<f64> {
        &self.mask
    }

    pub fn canvas_hw(&self) -> (usize, usize) {
        (self.canvas_h, self.canvas_w)
    }

    /// Forward warp: `(C, S, S)` patch to `(C, H, W)` canvas (zeros outside
    /// the mask).
    pub fn apply(&self, patch: &ArrayView3<f64>) -> Array3<f64> {
        let (c, sh, sw) = patch.dim();
        assert_eq!(
            (sh, sw),
            (self.patch_s, self.patch_s),
            "patch resolution does not match plan"
        );
        let plane = self.patch_s * self.patch_s;
        let flat: Vec<f64> = patch.iter().copied().collect();
        let mut out = Array3::<f64>::zeros((c, self.canvas_h, self.canvas_w));
        {
            let out_slice = out.as_slice_mut().unwrap();
            let canvas_plane = self.canvas_h * self.canvas_w;
            for e in &self.entries {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (src, w) in e.taps {
                        acc += w * flat[ch * plane + src as usize];
                    }
                    out_slice[ch * canvas_plane + e.out_idx as usize] = acc;
                }
            }
        }
        out
    }

    /// Transpose of [`WarpPlan::apply`]: scatter canvas gradients back into
    /// patch pixel gradients.
    pub fn backward(&self, grad_canvas: &ArrayView3<f64>) -> Array3<f64> {
        let (c, h, w) = grad_canvas.dim();
        assert_eq!((h, w), (self.canvas_h, self.canvas_w));
        let plane = self.patch_s * self.patch_s;
        let canvas_plane = h * w;
        let gflat: Vec<f64> = grad_canvas.iter().copied().collect();
        let mut out = Array3::<f64>::zeros((c, self.patch_s, self.patch_s));
        {
            let out_slice = out.as_slice_mut().unwrap();
            for e in &self.entries {
                for ch in 0..c {
                    let g = gflat[ch * canvas_plane + e.out_idx as usize];
                    for (src, wt) in e.taps {
                        out_slice[ch * plane + src as usize] += wt * g;
                    }
                }
            }
        }
        out
    }
}
