//! Color-thermal physics: equilibrium surface temperature under solar
//! irradiance and rendering of synthetic infrared counterparts for RGB
//! scenes.
//!
//! These routines are the ground-truth oracle the rest of the toolkit is
//! built on: the synthetic dataset generator renders its infrared channel
//! here, and the RGB-to-infrared adapter is trained against pixel pairs
//! sampled from these renders.

use crate::error::{Error, Result};
use crate::imageops::{self, BorderMode};
use ndarray::{Array3, ArrayView3};

/// Stefan-Boltzmann constant, W/(m^2 K^4). Fixed, never user-settable.
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Scene constants of the thermal equilibrium model, without absorptivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEnv {
    /// Solar irradiance, W/m^2, >= 0.
    pub irradiance_g: f64,
    /// Material emissivity, dimensionless, in (0, 1].
    pub emissivity: f64,
    /// Ambient temperature, Kelvin, > 0.
    pub ambient_t: f64,
}

impl Default for ThermalEnv {
    /// Typical clear-sky scene: G = 1000 W/m^2, eps = 0.95, T_ambient = 300 K.
    fn default() -> Self {
        Self {
            irradiance_g: 1000.0,
            emissivity: 0.95,
            ambient_t: 300.0,
        }
    }
}

impl ThermalEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.irradiance_g.is_finite() && self.irradiance_g >= 0.0) {
            return Err(Error::ParamDomain(format!(
                "irradiance_g must be finite and >= 0, got {}",
                self.irradiance_g
            )));
        }
        if !(self.emissivity > 0.0 && self.emissivity <= 1.0) {
            return Err(Error::ParamDomain(format!(
                "emissivity must lie in (0, 1], got {}",
                self.emissivity
            )));
        }
        if !(self.ambient_t.is_finite() && self.ambient_t > 0.0) {
            return Err(Error::ParamDomain(format!(
                "ambient_t must be finite and > 0, got {}",
                self.ambient_t
            )));
        }
        Ok(())
    }

    /// Attach a solar absorptivity to obtain full equilibrium parameters.
    pub fn with_alpha(&self, alpha: f64) -> ThermalParams {
        ThermalParams { alpha, env: *self }
    }
}

/// Full parameter set of the thermal equilibrium model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    /// Color-dependent solar absorptivity, dimensionless, in [0, 1].
    pub alpha: f64,
    pub env: ThermalEnv,
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::ParamDomain(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        self.env.validate()
    }
}

/// Mapping from equilibrium temperature to normalized infrared intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCameraConfig {
    /// Temperature rendered as intensity 0, Kelvin.
    pub t_min: f64,
    /// Temperature rendered as intensity 1, Kelvin.
    pub t_max: f64,
    /// Gaussian post-blur radius in pixels; 0 disables diffusion.
    pub diffusion_sigma: f64,
}

impl Default for ThermalCameraConfig {
    /// Fixed linear ramp spanning the temperatures reachable in the
    /// default scene (roughly 290 K for cold ground to 400 K for black
    /// surfaces in full sun).
    fn default() -> Self {
        Self {
            t_min: 290.0,
            t_max: 400.0,
            diffusion_sigma: 0.0,
        }
    }
}

impl ThermalCameraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > self.t_min) {
            return Err(Error::ParamDomain(format!(
                "camera requires t_max > t_min, got t_min={} t_max={}",
                self.t_min, self.t_max
            )));
        }
        if !(self.diffusion_sigma >= 0.0 && self.diffusion_sigma.is_finite()) {
            return Err(Error::ParamDomain(format!(
                "diffusion_sigma must be finite and >= 0, got {}",
                self.diffusion_sigma
            )));
        }
        Ok(())
    }

    /// Linear intensity ramp with clamping.
    pub fn intensity(&self, temperature_k: f64) -> f64 {
        ((temperature_k - self.t_min) / (self.t_max - self.t_min)).clamp(0.0, 1.0)
    }
}

/// Equilibrium surface temperature in Kelvin:
/// `((alpha * G) / (eps * sigma) + T_ambient^4)^(1/4)`.
///
/// Monotone non-decreasing in `alpha` and `G`; collapses to `T_ambient`
/// exactly when `alpha == 0`.
pub fn surface_temperature(params: &ThermalParams) -> Result<f64> {
    params.validate()?;
    if params.alpha == 0.0 {
        // Avoid rounding through the fourth power/root in the no-absorption case.
        return Ok(params.env.ambient_t);
    }
    let e = &params.env;
    let t4 = (params.alpha * e.irradiance_g) / (e.emissivity * STEFAN_BOLTZMANN)
        + e.ambient_t.powi(4);
    Ok(t4.powf(0.25))
}

/// Channel weights of the affine color-to-absorptivity map.
///
/// Calibrated so that black maps to 0.9, white to 0.2, and green absorbs
/// more than red.
pub const ABSORPTIVITY_WEIGHTS: [f64; 3] = [0.40, 0.15, 0.15];

/// Absorptivity ceiling reached by a black surface.
pub const ABSORPTIVITY_BLACK: f64 = 0.9;

/// Solar absorptivity of an RGB color: `0.9 - (0.40 r + 0.15 g + 0.15 b)`.
///
/// Affine and continuous, with range `[0.2, 0.9]` over the unit color cube.
pub fn color_to_absorptivity(rgb: [f64; 3]) -> Result<f64> {
    for (i, c) in rgb.iter().enumerate() {
        if !(0.0..=1.0).contains(c) || !c.is_finite() {
            return Err(Error::ParamDomain(format!(
                "rgb channel {i} must lie in [0, 1], got {c}"
            )));
        }
    }
    Ok(ABSORPTIVITY_BLACK
        - (ABSORPTIVITY_WEIGHTS[0] * rgb[0]
            + ABSORPTIVITY_WEIGHTS[1] * rgb[1]
            + ABSORPTIVITY_WEIGHTS[2] * rgb[2]))
}

/// Scalar color -> infrared intensity chain used per pixel by
/// [`render_synthetic_ir`] (before any diffusion blur).
pub fn ir_intensity_of_color(
    rgb: [f64; 3],
    env: &ThermalEnv,
    camera: &ThermalCameraConfig,
) -> Result<f64> {
    let alpha = color_to_absorptivity(rgb)?;
    let t = surface_temperature(&env.with_alpha(alpha))?;
    Ok(camera.intensity(t))
}

/// Render the synthetic infrared counterpart of an RGB image.
///
/// Per pixel: absorptivity from color, equilibrium temperature, then the
/// camera's linear intensity ramp. If `diffusion_sigma > 0` a Gaussian
/// blur is applied last to mimic heat diffusion and sensor softness.
///
/// Input is `(3, H, W)` in `[0, 1]`; output is `(1, H, W)` in `[0, 1]`.
pub fn render_synthetic_ir(
    rgb: &ArrayView3<f64>,
    env: &ThermalEnv,
    camera: &ThermalCameraConfig,
) -> Result<Array3<f64>> {
    env.validate()?;
    camera.validate()?;
    let (c, h, w) = rgb.dim();
    if c != 3 {
        return Err(Error::Shape(format!(
            "render_synthetic_ir expects a (3, H, W) image, got {} channels",
            c
        )));
    }
    let mut out = Array3::<f64>::zeros((1, h, w));
    for y in 0..h {
        for x in 0..w {
            let px = [rgb[(0, y, x)], rgb[(1, y, x)], rgb[(2, y, x)]];
            out[(0, y, x)] = ir_intensity_of_color(px, env, camera)?;
        }
    }
    if camera.diffusion_sigma > 0.0 {
        out = imageops::gaussian_blur(&out.view(), camera.diffusion_sigma, BorderMode::Renormalize);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn env() -> ThermalEnv {
        ThermalEnv::default()
    }

    #[test]
    fn zero_absorption_returns_ambient_exactly() {
        let t = surface_temperature(&env().with_alpha(0.0)).unwrap();
        assert_eq!(t, 300.0);
    }

    #[test]
    fn black_surface_temperature_matches_direct_evaluation() {
        // Direct numeric evaluation of the equilibrium model at the black
        // endpoint (alpha = 0.9, G = 1000, eps = 0.95, T_ambient = 300).
        let direct = ((0.9 * 1000.0) / (0.95 * STEFAN_BOLTZMANN) + 300.0_f64.powi(4)).powf(0.25);
        let t = surface_temperature(&env().with_alpha(0.9)).unwrap();
        assert!((t - direct).abs() / direct < 1e-12);
        assert!((t - 396.9).abs() < 0.1, "expected ~396.9 K, got {t}");
    }

    #[test]
    fn white_surface_cooler_than_black() {
        let t_white = surface_temperature(&env().with_alpha(0.2)).unwrap();
        let t_black = surface_temperature(&env().with_alpha(0.9)).unwrap();
        assert!((t_white - 329.7).abs() < 0.1, "expected ~329.7 K, got {t_white}");
        assert!(t_white < t_black);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = env().with_alpha(0.5);
        p.env.emissivity = 0.0;
        assert!(matches!(surface_temperature(&p), Err(Error::ParamDomain(_))));
        let mut p = env().with_alpha(0.5);
        p.env.ambient_t = -10.0;
        assert!(matches!(surface_temperature(&p), Err(Error::ParamDomain(_))));
        assert!(matches!(
            surface_temperature(&env().with_alpha(1.5)),
            Err(Error::ParamDomain(_))
        ));
    }

    #[test]
    fn absorptivity_endpoints_and_ordering() {
        assert_eq!(color_to_absorptivity([0.0, 0.0, 0.0]).unwrap(), 0.9);
        assert!((color_to_absorptivity([1.0, 1.0, 1.0]).unwrap() - 0.2).abs() < 1e-15);
        let green = color_to_absorptivity([0.0, 1.0, 0.0]).unwrap();
        let red = color_to_absorptivity([1.0, 0.0, 0.0]).unwrap();
        assert!((green - 0.75).abs() < 1e-15);
        assert!((red - 0.50).abs() < 1e-15);
        assert!(green > red);
    }

    #[test]
    fn absorptivity_rejects_out_of_range() {
        assert!(color_to_absorptivity([1.2, 0.0, 0.0]).is_err());
        assert!(color_to_absorptivity([0.0, -0.1, 0.0]).is_err());
    }

    #[test]
    fn absorptivity_is_affine() {
        // alpha(c1) - alpha(c2) == -w . (c1 - c2)
        let c1 = [0.3, 0.8, 0.1];
        let c2 = [0.6, 0.2, 0.9];
        let lhs = color_to_absorptivity(c1).unwrap() - color_to_absorptivity(c2).unwrap();
        let rhs: f64 = -(ABSORPTIVITY_WEIGHTS[0] * (c1[0] - c2[0])
            + ABSORPTIVITY_WEIGHTS[1] * (c1[1] - c2[1])
            + ABSORPTIVITY_WEIGHTS[2] * (c1[2] - c2[2]));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn constant_image_renders_constant_ir() {
        let mut img = Array3::<f64>::zeros((3, 4, 5));
        img.fill(0.3);
        let ir = render_synthetic_ir(&img.view(), &env(), &ThermalCameraConfig::default()).unwrap();
        let first = ir[(0, 0, 0)];
        for v in ir.iter() {
            assert_eq!(*v, first);
        }
    }

    #[test]
    fn black_half_brighter_than_white_half_in_ir() {
        let mut img = Array3::<f64>::zeros((3, 4, 8));
        // left half black (zeros already), right half white
        for ch in 0..3 {
            for y in 0..4 {
                for x in 4..8 {
                    img[(ch, y, x)] = 1.0;
                }
            }
        }
        let ir = render_synthetic_ir(&img.view(), &env(), &ThermalCameraConfig::default()).unwrap();
        assert!(ir[(0, 1, 1)] > ir[(0, 1, 6)]);
    }

    #[test]
    fn blur_off_render_matches_scalar_chain_on_all_pixels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (h, w) = (6, 7);
        let mut img = Array3::<f64>::zeros((3, h, w));
        for v in img.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let camera = ThermalCameraConfig::default();
        let ir = render_synthetic_ir(&img.view(), &env(), &camera).unwrap();
        for y in 0..h {
            for x in 0..w {
                let px = [img[(0, y, x)], img[(1, y, x)], img[(2, y, x)]];
                let expect = ir_intensity_of_color(px, &env(), &camera).unwrap();
                assert_eq!(ir[(0, y, x)], expect);
            }
        }
    }

    #[test]
    fn camera_invariant_enforced() {
        let img = Array3::<f64>::zeros((3, 2, 2));
        let bad = ThermalCameraConfig {
            t_min: 400.0,
            t_max: 300.0,
            diffusion_sigma: 0.0,
        };
        assert!(render_synthetic_ir(&img.view(), &env(), &bad).is_err());
    }

    proptest! {
        #[test]
        fn temperature_monotone_in_alpha_and_irradiance(
            a1 in 0.0..1.0f64, a2 in 0.0..1.0f64,
            g1 in 0.0..1500.0f64, g2 in 0.0..1500.0f64,
            eps in 0.05..1.0f64, t_amb in 200.0..350.0f64,
        ) {
            let base = ThermalEnv { irradiance_g: g1, emissivity: eps, ambient_t: t_amb };
            let (lo_a, hi_a) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let t_lo = surface_temperature(&base.with_alpha(lo_a)).unwrap();
            let t_hi = surface_temperature(&base.with_alpha(hi_a)).unwrap();
            prop_assert!(t_lo <= t_hi + 1e-12);

            let (lo_g, hi_g) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let env_lo = ThermalEnv { irradiance_g: lo_g, emissivity: eps, ambient_t: t_amb };
            let env_hi = ThermalEnv { irradiance_g: hi_g, emissivity: eps, ambient_t: t_amb };
            let t_lo = surface_temperature(&env_lo.with_alpha(a1)).unwrap();
            let t_hi = surface_temperature(&env_hi.with_alpha(a1)).unwrap();
            prop_assert!(t_lo <= t_hi + 1e-12);

            // Result never drops below ambient.
            prop_assert!(surface_temperature(&base.with_alpha(a1)).unwrap() >= t_amb - 1e-12);
        }
    }
}
