//! Paired visible/infrared dataset handling: on-disk layout, label parsing,
//! multi-scale clipping augmentation and fully synthetic scene generation.
//!
//! On-disk layout (all splits share a root):
//!
//! ```text
//! root/<split>/visible/<id>.png    8-bit RGB
//! root/<split>/infrared/<id>.png   8-bit grayscale
//! root/<split>/labels/<id>.txt     one object per line: "class cx cy w h"
//! ```
//!
//! Label coordinates are center-format, normalized to `[0, 1]`, and are
//! converted to pixel corners on load (`x1 = (cx - w/2) * W`, ...).

use crate::bbox::{LabeledBox, PixelBox};
use crate::error::{Error, Result};
use crate::imageops;
use crate::thermal::{self, ThermalCameraConfig, ThermalEnv};
use ndarray::{Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Output resolution multi-scale crops are resized to.
pub const DEFAULT_TRAIN_RESOLUTION: usize = 416;

/// Crop-window dilation factors of the multi-scale clipping augmentation.
pub const DEFAULT_DILATION_FACTORS: [f64; 3] = [2.0, 4.0, 8.0];

/// An aligned visible/infrared sample with its ground-truth boxes.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub id: String,
    /// (3, H, W) in [0, 1].
    pub visible: Array3<f64>,
    /// (1, H, W) in [0, 1].
    pub infrared: Array3<f64>,
    pub boxes: Vec<LabeledBox>,
}

impl ImagePair {
    pub fn hw(&self) -> (usize, usize) {
        let d = self.visible.dim();
        (d.1, d.2)
    }

    pub fn validate(&self) -> Result<()> {
        let (_, h, w) = self.visible.dim();
        let (ic, ih, iw) = self.infrared.dim();
        if ic != 1 || ih != h || iw != w {
            return Err(Error::Shape(format!(
                "pair '{}': infrared {}x{}x{} does not align with visible HxW {}x{}",
                self.id, ic, ih, iw, h, w
            )));
        }
        for b in &self.boxes {
            let bb = &b.bbox;
            if bb.is_degenerate()
                || bb.x1 < 0.0
                || bb.y1 < 0.0
                || bb.x2 > w as f64 + 1e-6
                || bb.y2 > h as f64 + 1e-6
            {
                return Err(Error::Shape(format!(
                    "pair '{}': box ({}, {}, {}, {}) outside {}x{} image",
                    self.id, bb.x1, bb.y1, bb.x2, bb.y2, w, h
                )));
            }
        }
        Ok(())
    }
}

/// Index of one dataset split on disk.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: String,
    /// Sample ids, sorted for deterministic iteration.
    pub ids: Vec<String>,
}

/// An opened split with a decoded-sample cache.
pub struct Dataset {
    pub manifest: DatasetManifest,
    cache: Mutex<HashMap<String, ImagePair>>,
}

impl Dataset {
    /// Scan `root/split` and verify every id resolves to all three files.
    pub fn open(root: impl AsRef<Path>, split: &str) -> Result<Dataset> {
        let root = root.as_ref().to_path_buf();
        let vis_dir = root.join(split).join("visible");
        if !vis_dir.is_dir() {
            return Err(Error::Config(format!(
                "dataset split directory not found: {}",
                vis_dir.display()
            )));
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&vis_dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("png") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        if ids.is_empty() {
            return Err(Error::Config(format!(
                "no samples under {}",
                vis_dir.display()
            )));
        }
        let manifest = DatasetManifest {
            root,
            split: split.to_string(),
            ids,
        };
        for id in &manifest.ids {
            for (sub, ext, what) in [
                ("infrared", "png", "infrared image"),
                ("labels", "txt", "label file"),
            ] {
                let p = manifest
                    .root
                    .join(&manifest.split)
                    .join(sub)
                    .join(format!("{id}.{ext}"));
                if !p.is_file() {
                    return Err(Error::Pairing {
                        id: id.clone(),
                        reason: format!("missing {what} {}", p.display()),
                    });
                }
            }
        }
        Ok(Dataset {
            manifest,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.ids.is_empty()
    }

    /// Load (and cache) one pair by id.
    pub fn load_pair(&self, id: &str) -> Result<ImagePair> {
        if let Some(p) = self.cache.lock().unwrap().get(id) {
            return Ok(p.clone());
        }
        let base = self.manifest.root.join(&self.manifest.split);
        let vis_path = base.join("visible").join(format!("{id}.png"));
        let ir_path = base.join("infrared").join(format!("{id}.png"));
        let label_path = base.join("labels").join(format!("{id}.txt"));
        if !ir_path.is_file() {
            return Err(Error::Pairing {
                id: id.to_string(),
                reason: format!("missing infrared image {}", ir_path.display()),
            });
        }
        let visible = png_io::load_rgb(&vis_path)?;
        let infrared = png_io::load_gray(&ir_path)?;
        let (_, h, w) = visible.dim();
        let boxes = parse_label_file(&label_path, w, h)?;
        let pair = ImagePair {
            id: id.to_string(),
            visible,
            infrared,
            boxes,
        };
        pair.validate()?;
        self.cache
            .lock()
            .unwrap()
            .insert(id.to_string(), pair.clone());
        Ok(pair)
    }

    /// Load every pair in manifest order.
    pub fn load_all(&self) -> Result<Vec<ImagePair>> {
        self.manifest.ids.iter().map(|id| self.load_pair(id)).collect()
    }
}

/// Parse a label file of normalized center-format lines into pixel boxes.
pub fn parse_label_file(path: &Path, img_w: usize, img_h: usize) -> Result<Vec<LabeledBox>> {
    let text = fs::read_to_string(path)?;
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mk_err = |reason: String| Error::LabelParse {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(mk_err(format!("expected 5 fields, got {}", fields.len())));
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|e| mk_err(format!("bad class id '{}': {e}", fields[0])))?;
        let mut vals = [0.0f64; 4];
        for (k, f) in fields[1..].iter().enumerate() {
            vals[k] = f
                .parse()
                .map_err(|e| mk_err(format!("bad coordinate '{f}': {e}")))?;
            if !(0.0..=1.0).contains(&vals[k]) {
                return Err(mk_err(format!("coordinate '{f}' outside [0, 1]")));
            }
        }
        let (cx, cy, w, h) = (vals[0], vals[1], vals[2], vals[3]);
        let bbox = PixelBox::new(
            (cx - w / 2.0) * img_w as f64,
            (cy - h / 2.0) * img_h as f64,
            (cx + w / 2.0) * img_w as f64,
            (cy + h / 2.0) * img_h as f64,
        );
        boxes.push(LabeledBox { class_id, bbox });
    }
    Ok(boxes)
}

/// Format boxes back to normalized center-format label lines.
pub fn format_labels(boxes: &[LabeledBox], img_w: usize, img_h: usize) -> String {
    let mut out = String::new();
    for b in boxes {
        let bb = &b.bbox;
        let cx = (bb.x1 + bb.x2) / 2.0 / img_w as f64;
        let cy = (bb.y1 + bb.y2) / 2.0 / img_h as f64;
        let w = bb.width() / img_w as f64;
        let h = bb.height() / img_h as f64;
        out.push_str(&format!("{} {:.6} {:.6} {:.6} {:.6}\n", b.class_id, cx, cy, w, h));
    }
    out
}

/// Write one pair into the dataset layout (creates directories as needed).
pub fn write_pair(
    root: &Path,
    split: &str,
    id: &str,
    visible: &ArrayView3<f64>,
    infrared: &ArrayView3<f64>,
    boxes: &[LabeledBox],
) -> Result<()> {
    let base = root.join(split);
    for sub in ["visible", "infrared", "labels"] {
        fs::create_dir_all(base.join(sub))?;
    }
    png_io::save_rgb(&base.join("visible").join(format!("{id}.png")), visible)?;
    png_io::save_gray(&base.join("infrared").join(format!("{id}.png")), infrared)?;
    let (_, h, w) = visible.dim();
    fs::write(
        base.join("labels").join(format!("{id}.txt")),
        format_labels(boxes, w, h),
    )?;
    Ok(())
}

/// Multi-scale clipping: for every box and every dilation factor, crop a
/// window of `factor` times the box size (jittered so the box stays inside,
/// clipped to the image), apply it to both modalities identically, remap
/// boxes into the crop frame and resize to `out_resolution`.
pub fn multiscale_clip(
    pair: &ImagePair,
    dilation_factors: &[f64],
    out_resolution: usize,
    rng_seed: u64,
) -> Result<Vec<ImagePair>> {
    if pair.boxes.is_empty() {
        return Err(Error::ParamDomain(format!(
            "multiscale_clip requires at least one box (pair '{}')",
            pair.id
        )));
    }
    pair.validate()?;
    let (h, w) = pair.hw();
    let mut out = Vec::new();
    for (bi, b) in pair.boxes.iter().enumerate() {
        for (fi, &f) in dilation_factors.iter().enumerate() {
            if f < 1.0 {
                return Err(Error::ParamDomain(format!(
                    "dilation factor must be >= 1, got {f}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream((bi * dilation_factors.len() + fi) as u64 + 1);
            let bb = &b.bbox;
            let win_w = (f * bb.width()).max(2.0);
            let win_h = (f * bb.height()).max(2.0);
            let x0 = jittered_window_origin(&mut rng, bb.x1, bb.x2, win_w, w as f64);
            let y0 = jittered_window_origin(&mut rng, bb.y1, bb.y2, win_h, h as f64);
            let x0i = x0.floor().max(0.0) as usize;
            let y0i = y0.floor().max(0.0) as usize;
            let x1i = ((x0 + win_w).ceil() as usize).min(w);
            let y1i = ((y0 + win_h).ceil() as usize).min(h);
            let cw = x1i - x0i;
            let ch = y1i - y0i;
            let vis_crop = imageops::crop(&pair.visible.view(), y0i, x0i, ch, cw);
            let ir_crop = imageops::crop(&pair.infrared.view(), y0i, x0i, ch, cw);
            let vis = imageops::resize_bilinear(&vis_crop.view(), out_resolution, out_resolution);
            let ir = imageops::resize_bilinear(&ir_crop.view(), out_resolution, out_resolution);
            let sx = out_resolution as f64 / cw as f64;
            let sy = out_resolution as f64 / ch as f64;
            // Keep every box whose center falls inside the window, clipped
            // to the window so remapped coordinates stay in bounds.
            let mut boxes = Vec::new();
            for ob in &pair.boxes {
                let (cx, cy) = ob.bbox.center();
                if cx < x0i as f64 || cx >= x1i as f64 || cy < y0i as f64 || cy >= y1i as f64 {
                    continue;
                }
                let clipped = PixelBox::new(
                    ob.bbox.x1.max(x0i as f64),
                    ob.bbox.y1.max(y0i as f64),
                    ob.bbox.x2.min(x1i as f64),
                    ob.bbox.y2.min(y1i as f64),
                )
                .shifted(-(x0i as f64), -(y0i as f64))
                .scaled(sx, sy);
                if !clipped.is_degenerate() {
                    boxes.push(LabeledBox {
                        class_id: ob.class_id,
                        bbox: clipped,
                    });
                }
            }
            out.push(ImagePair {
                id: format!("{}_b{}_f{}", pair.id, bi, f),
                visible: vis,
                infrared: ir,
                boxes,
            });
        }
    }
    Ok(out)
}

/// Uniformly place a window of size `win` so that `[lo, hi]` stays inside,
/// clamped into the image extent `[0, img]`.
fn jittered_window_origin(rng: &mut ChaCha8Rng, lo: f64, hi: f64, win: f64, img: f64) -> f64 {
    let a = hi - win;
    let b = lo;
    let u = if b > a { rng.gen_range(a..=b) } else { a };
    u.clamp(0.0, (img - win).max(0.0))
}

/// Configuration of the synthetic scene generator.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    /// Square image side in pixels.
    pub image_size: usize,
    /// Vehicle count range per scene (inclusive).
    pub vehicles_min: usize,
    pub vehicles_max: usize,
    /// Vehicle side as a fraction of the image side (inclusive range).
    pub vehicle_frac_min: f64,
    pub vehicle_frac_max: f64,
    /// Optional fixed color palette; `None` samples random saturated colors.
    pub palette: Option<Vec<[f64; 3]>>,
    pub env: ThermalEnv,
    pub camera: ThermalCameraConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            vehicles_min: 1,
            vehicles_max: 4,
            vehicle_frac_min: 0.08,
            vehicle_frac_max: 0.40,
            palette: None,
            env: ThermalEnv::default(),
            camera: ThermalCameraConfig::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return Err(Error::Config("image_size must be >= 16".into()));
        }
        if self.vehicles_min < 1 || self.vehicles_max < self.vehicles_min {
            return Err(Error::Config("vehicle count range must be 1 <= min <= max".into()));
        }
        if !(self.vehicle_frac_min > 0.0
            && self.vehicle_frac_max <= 1.0
            && self.vehicle_frac_min <= self.vehicle_frac_max)
        {
            return Err(Error::Config("vehicle_frac range must satisfy 0 < min <= max <= 1".into()));
        }
        self.env.validate()?;
        self.camera.validate()
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.fract() * 6.0).rem_euclid(6.0);
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Generate one synthetic scene: textured muted background with colored
/// vehicle rectangles. Returns the RGB image and the vehicle boxes.
fn gen_scene(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> (Array3<f64>, Vec<LabeledBox>) {
    let n = cfg.image_size;
    // Muted, bright-ish background so vehicles stand out in both modalities.
    let base: [f64; 3] = [
        rng.gen_range(0.55..0.80),
        rng.gen_range(0.55..0.80),
        rng.gen_range(0.55..0.80),
    ];
    // Low-frequency value noise: random coarse grid upsampled bilinearly.
    let grid = 8usize;
    let mut coarse = Array3::<f64>::zeros((3, grid, grid));
    for v in coarse.iter_mut() {
        *v = rng.gen_range(-0.06..0.06);
    }
    let noise = imageops::resize_bilinear(&coarse.view(), n, n);
    let mut img = Array3::<f64>::zeros((3, n, n));
    for ch in 0..3 {
        for y in 0..n {
            for x in 0..n {
                let fine = rng.gen_range(-0.015..0.015);
                img[(ch, y, x)] = (base[ch] + noise[(ch, y, x)] + fine).clamp(0.0, 1.0);
            }
        }
    }

    let bg_ir = thermal::ir_intensity_of_color(base, &cfg.env, &cfg.camera).unwrap_or(0.5);
    let n_vehicles = rng.gen_range(cfg.vehicles_min..=cfg.vehicles_max);
    let mut boxes: Vec<LabeledBox> = Vec::new();
    for _ in 0..n_vehicles {
        let w = (rng.gen_range(cfg.vehicle_frac_min..=cfg.vehicle_frac_max) * n as f64) as usize;
        let h = (rng.gen_range(cfg.vehicle_frac_min..=cfg.vehicle_frac_max) * n as f64) as usize;
        let (w, h) = (w.max(4), h.max(4));
        if w >= n || h >= n {
            continue;
        }
        let mut placed = None;
        for _ in 0..30 {
            let x0 = rng.gen_range(0..=(n - w));
            let y0 = rng.gen_range(0..=(n - h));
            let cand = PixelBox::new(x0 as f64, y0 as f64, (x0 + w) as f64, (y0 + h) as f64);
            let overlaps = boxes.iter().any(|b| {
                let inter = cand.intersection_area(&b.bbox);
                inter > 0.2 * cand.area().min(b.bbox.area())
            });
            if !overlaps {
                placed = Some(cand);
                break;
            }
        }
        let Some(bb) = placed else { continue };
        let color = pick_vehicle_color(cfg, rng, bg_ir);
        // Flat body with a slightly darkened roof band for visible texture.
        let x0 = bb.x1 as usize;
        let y0 = bb.y1 as usize;
        for yy in y0..y0 + h {
            for xx in x0..x0 + w {
                let shade = if yy < y0 + h / 4 { 0.85 } else { 1.0 };
                for ch in 0..3 {
                    img[(ch, yy, xx)] = (color[ch] * shade).clamp(0.0, 1.0);
                }
            }
        }
        boxes.push(LabeledBox { class_id: 0, bbox: bb });
    }
    (img, boxes)
}

/// Sample a vehicle color, rejecting colors whose infrared intensity is too
/// close to the background's (an invisible-in-IR vehicle teaches the toy
/// detectors nothing).
fn pick_vehicle_color(cfg: &SceneConfig, rng: &mut ChaCha8Rng, bg_ir: f64) -> [f64; 3] {
    if let Some(palette) = &cfg.palette {
        let i = rng.gen_range(0..palette.len());
        return palette[i];
    }
    for _ in 0..50 {
        let c = hsv_to_rgb(
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.7..1.0),
            rng.gen_range(0.5..1.0),
        );
        let ir = thermal::ir_intensity_of_color(c, &cfg.env, &cfg.camera).unwrap_or(bg_ir);
        if (ir - bg_ir).abs() >= 0.12 {
            return c;
        }
    }
    // Fall back to whichever extreme contrasts more.
    let black_ir = thermal::ir_intensity_of_color([0.0; 3], &cfg.env, &cfg.camera).unwrap_or(1.0);
    let white_ir = thermal::ir_intensity_of_color([1.0; 3], &cfg.env, &cfg.camera).unwrap_or(0.0);
    if (black_ir - bg_ir).abs() >= (white_ir - bg_ir).abs() {
        [0.0; 3]
    } else {
        [1.0; 3]
    }
}

/// Generate a synthetic paired dataset split on disk.
///
/// Deterministic for a fixed seed: same seed, same bytes.
pub fn gen_synthetic_dataset(
    n_images: usize,
    cfg: &SceneConfig,
    split: &str,
    rng_seed: u64,
    out_root: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if n_images < 1 {
        return Err(Error::Config("n_images must be >= 1".into()));
    }
    cfg.validate()?;
    let out_root = out_root.as_ref();
    let mut ids = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(i as u64 + 1);
        let (mut visible, mut boxes) = gen_scene(cfg, &mut rng);
        if boxes.is_empty() {
            // Guarantee at least one target per scene.
            let n = cfg.image_size;
            let side = (0.25 * n as f64) as usize;
            let x0 = (n - side) / 2;
            let bb = PixelBox::new(x0 as f64, x0 as f64, (x0 + side) as f64, (x0 + side) as f64);
            for yy in x0..x0 + side {
                for xx in x0..x0 + side {
                    visible[(0, yy, xx)] = 0.05;
                    visible[(1, yy, xx)] = 0.05;
                    visible[(2, yy, xx)] = 0.05;
                }
            }
            boxes.push(LabeledBox { class_id: 0, bbox: bb });
        }
        let infrared = thermal::render_synthetic_ir(&visible.view(), &cfg.env, &cfg.camera)?;
        let id = format!("{i:06}");
        write_pair(out_root, split, &id, &visible.view(), &infrared.view(), &boxes)?;
        ids.push(id);
    }
    Ok(DatasetManifest {
        root: out_root.to_path_buf(),
        split: split.to_string(),
        ids,
    })
}

/// 8-bit lossless PNG I/O for (C, H, W) float images.
pub mod png_io {
    use super::*;
    use image::{GrayImage, RgbImage};

    pub fn load_rgb(path: &Path) -> Result<Array3<f64>> {
        let img = image::open(path)?.into_rgb8();
        let (w, h) = img.dimensions();
        let mut out = Array3::<f64>::zeros((3, h as usize, w as usize));
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..3 {
                out[(c, y as usize, x as usize)] = px.0[c] as f64 / 255.0;
            }
        }
        Ok(out)
    }

    pub fn load_gray(path: &Path) -> Result<Array3<f64>> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        let mut out = Array3::<f64>::zeros((1, h as usize, w as usize));
        for (x, y, px) in img.enumerate_pixels() {
            out[(0, y as usize, x as usize)] = px.0[0] as f64 / 255.0;
        }
        Ok(out)
    }

    pub fn to_u8(v: f64) -> u8 {
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    }

    pub fn save_rgb(path: &Path, img: &ArrayView3<f64>) -> Result<()> {
        let (c, h, w) = img.dim();
        if c != 3 {
            return Err(Error::Shape(format!("save_rgb expects 3 channels, got {c}")));
        }
        let mut out = RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                out.put_pixel(
                    x as u32,
                    y as u32,
                    image::Rgb([
                        to_u8(img[(0, y, x)]),
                        to_u8(img[(1, y, x)]),
                        to_u8(img[(2, y, x)]),
                    ]),
                );
            }
        }
        out.save(path)?;
        Ok(())
    }

    pub fn save_gray(path: &Path, img: &ArrayView3<f64>) -> Result<()> {
        let (c, h, w) = img.dim();
        if c != 1 {
            return Err(Error::Shape(format!("save_gray expects 1 channel, got {c}")));
        }
        let mut out = GrayImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                out.put_pixel(x as u32, y as u32, image::Luma([to_u8(img[(0, y, x)])]));
            }
        }
        out.save(path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn label_conversion_matches_hand_arithmetic() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "0 0.5 0.5 0.2 0.1\n").unwrap();
        let boxes = parse_label_file(&p, 640, 640).unwrap();
        assert_eq!(boxes.len(), 1);
        let b = boxes[0].bbox;
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (256.0, 288.0, 384.0, 352.0));
    }

    #[test]
    fn malformed_label_line_reports_line_number() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "0 0.5 0.5 0.2 0.1\n0 nonsense 0.5 0.2 0.1\n").unwrap();
        match parse_label_file(&p, 64, 64) {
            Err(Error::LabelParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected label parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_label_file_is_valid() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "").unwrap();
        assert!(parse_label_file(&p, 64, 64).unwrap().is_empty());
    }

    #[test]
    fn label_roundtrip_within_half_pixel() {
        let boxes = vec![LabeledBox {
            class_id: 0,
            bbox: PixelBox::new(13.0, 27.0, 61.0, 58.0),
        }];
        let text = format_labels(&boxes, 128, 96);
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, text).unwrap();
        let back = parse_label_file(&p, 128, 96).unwrap();
        let b = back[0].bbox;
        for (a, e) in [(b.x1, 13.0), (b.y1, 27.0), (b.x2, 61.0), (b.y2, 58.0)] {
            assert!((a - e).abs() <= 0.5, "{a} vs {e}");
        }
    }

    fn tiny_cfg() -> SceneConfig {
        SceneConfig {
            image_size: 64,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn synthetic_dataset_is_seed_deterministic() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        gen_synthetic_dataset(3, &tiny_cfg(), "train", 9, d1.path()).unwrap();
        gen_synthetic_dataset(3, &tiny_cfg(), "train", 9, d2.path()).unwrap();
        for id in ["000000", "000001", "000002"] {
            for sub in ["visible", "infrared"] {
                let a = fs::read(d1.path().join("train").join(sub).join(format!("{id}.png"))).unwrap();
                let b = fs::read(d2.path().join("train").join(sub).join(format!("{id}.png"))).unwrap();
                assert_eq!(a, b, "{sub}/{id} differs between identical seeds");
            }
            let a = fs::read(d1.path().join("train/labels").join(format!("{id}.txt"))).unwrap();
            let b = fs::read(d2.path().join("train/labels").join(format!("{id}.txt"))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn generated_pairs_roundtrip_through_loader() {
        let dir = tempdir().unwrap();
        let manifest = gen_synthetic_dataset(4, &tiny_cfg(), "val", 3, dir.path()).unwrap();
        let ds = Dataset::open(dir.path(), "val").unwrap();
        assert_eq!(ds.manifest.ids, manifest.ids);
        for id in &ds.manifest.ids {
            let pair = ds.load_pair(id).unwrap();
            pair.validate().unwrap();
            assert!(!pair.boxes.is_empty());
        }
    }

    #[test]
    fn missing_infrared_is_a_pairing_error() {
        let dir = tempdir().unwrap();
        gen_synthetic_dataset(2, &tiny_cfg(), "train", 1, dir.path()).unwrap();
        fs::remove_file(dir.path().join("train/infrared/000001.png")).unwrap();
        match Dataset::open(dir.path(), "train") {
            Err(Error::Pairing { id, .. }) => assert_eq!(id, "000001"),
            other => panic!("expected pairing error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn black_vehicle_brighter_than_white_vehicle_in_ir() {
        let dir = tempdir().unwrap();
        let cfg = SceneConfig {
            image_size: 96,
            vehicles_min: 2,
            vehicles_max: 2,
            palette: Some(vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]),
            ..SceneConfig::default()
        };
        gen_synthetic_dataset(6, &cfg, "train", 5, dir.path()).unwrap();
        let ds = Dataset::open(dir.path(), "train").unwrap();
        let mut checked = 0;
        for id in &ds.manifest.ids {
            let pair = ds.load_pair(id).unwrap();
            let mut black_ir = None;
            let mut white_ir = None;
            for b in &pair.boxes {
                let (cx, cy) = b.bbox.center();
                let (x, y) = (cx as usize, cy as usize);
                let vis = pair.visible[(0, y, x)];
                let ir = pair.infrared[(0, y, x)];
                if vis < 0.1 {
                    black_ir = Some(ir);
                } else if vis > 0.9 {
                    white_ir = Some(ir);
                }
            }
            if let (Some(b), Some(w)) = (black_ir, white_ir) {
                assert!(b > w, "black vehicle must be brighter in IR ({b} <= {w})");
                checked += 1;
            }
        }
        assert!(checked > 0, "no scene had both a black and a white vehicle");
    }

    #[test]
    fn multiscale_clip_cardinality_and_bounds() {
        let dir = tempdir().unwrap();
        gen_synthetic_dataset(1, &tiny_cfg(), "train", 21, dir.path()).unwrap();
        let ds = Dataset::open(dir.path(), "train").unwrap();
        let pair = ds.load_pair(&ds.manifest.ids[0]).unwrap();
        let n_boxes = pair.boxes.len();
        let crops = multiscale_clip(&pair, &DEFAULT_DILATION_FACTORS, 64, 7).unwrap();
        assert_eq!(crops.len(), n_boxes * 3);
        for c in &crops {
            c.validate().unwrap();
            assert_eq!(c.hw(), (64, 64));
            assert!(!c.boxes.is_empty(), "focal box must survive the crop");
        }
    }

    #[test]
    fn multiscale_clip_boxes_in_bounds_over_many_trials() {
        let dir = tempdir().unwrap();
        let cfg = SceneConfig {
            image_size: 128,
            vehicles_min: 2,
            vehicles_max: 4,
            ..SceneConfig::default()
        };
        gen_synthetic_dataset(5, &cfg, "train", 33, dir.path()).unwrap();
        let ds = Dataset::open(dir.path(), "train").unwrap();
        let mut trials = 0;
        for id in &ds.manifest.ids {
            let pair = ds.load_pair(id).unwrap();
            for seed in 0..40 {
                for c in multiscale_clip(&pair, &DEFAULT_DILATION_FACTORS, 96, seed).unwrap() {
                    for b in &c.boxes {
                        assert!(b.bbox.x1 >= -1e-9 && b.bbox.y1 >= -1e-9);
                        assert!(b.bbox.x2 <= 96.0 + 1e-9 && b.bbox.y2 <= 96.0 + 1e-9);
                        trials += 1;
                    }
                }
            }
        }
        assert!(trials >= 1000, "wanted >= 1000 remapped boxes, got {trials}");
    }

    #[test]
    fn multiscale_clip_deterministic_under_seed() {
        let dir = tempdir().unwrap();
        gen_synthetic_dataset(1, &tiny_cfg(), "train", 2, dir.path()).unwrap();
        let ds = Dataset::open(dir.path(), "train").unwrap();
        let pair = ds.load_pair(&ds.manifest.ids[0]).unwrap();
        let a = multiscale_clip(&pair, &[2.0, 4.0], 48, 11).unwrap();
        let b = multiscale_clip(&pair, &[2.0, 4.0], 48, 11).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.visible, y.visible);
            assert_eq!(x.infrared, y.infrared);
        }
    }
}
