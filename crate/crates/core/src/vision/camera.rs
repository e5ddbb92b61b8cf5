use serde::{Deserialize, Serialize};

use super::homography::{calibrate_homography, world_to_pixel, Homography};
use crate::error::{Error, Result};
use crate::geometry::{Field, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Standard deviation of additive pixel noise.
    pub sigma: f64,
    /// Amplitude of the smooth illumination ramp.
    pub gradient: f64,
    pub background: f64,
    /// Per-sensor, per-frame probability that the LED is hidden.
    pub occlusion: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.05, gradient: 0.1, background: 0.1, occlusion: 0.05 }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self { sigma: 0.0, gradient: 0.0, background: 0.0, occlusion: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub blur_sigma: f64,
    pub window: usize,
    /// Added to the local mean of the equalized image to form the threshold.
    pub offset: f64,
    pub min_area: usize,
    pub max_area: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { blur_sigma: 1.0, window: 31, offset: 0.25, min_area: 4, max_area: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisionConfig {
    pub meters_per_pixel: f64,
    /// Keystone strength of the simulated camera; 0 is a straight-down view.
    pub tilt: f64,
    pub led_radius_px: f64,
    pub led_intensity: f64,
    pub noise: NoiseConfig,
    pub detector: DetectorConfig,
    /// Frames per observation fed to the temporal filter.
    pub frames: usize,
    pub match_radius_px: f64,
    /// Border of ground outside the field that the camera also sees.
    pub margin_px: usize,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            meters_per_pixel: 0.5,
            tilt: 0.0,
            led_radius_px: 3.0,
            led_intensity: 0.8,
            noise: NoiseConfig::default(),
            detector: DetectorConfig::default(),
            frames: 3,
            match_radius_px: 3.0,
            margin_px: 8,
        }
    }
}

impl VisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.meters_per_pixel > 0.0) || !(self.led_radius_px > 0.0) {
            return Err(Error::InvalidConfig("vision scale and LED radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.noise.occlusion) || self.noise.sigma < 0.0 {
            return Err(Error::InvalidConfig("occlusion must lie in [0, 1] and noise sigma >= 0".into()));
        }
        if self.frames == 0 || self.detector.window == 0 || self.detector.min_area > self.detector.max_area {
            return Err(Error::InvalidConfig("vision frames, window and area gate must be consistent".into()));
        }
        if !(0.0..0.5).contains(&self.tilt) {
            return Err(Error::InvalidConfig("camera tilt must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Overhead camera: true projection used for rendering plus the matrix
/// recovered from the four marker correspondences, used for localization.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub width_px: usize,
    pub height_px: usize,
    pub projection: Homography,
    pub homography: Homography,
    pub markers: Vec<(Point, (f64, f64))>,
    pub led_radius_px: f64,
    pub led_intensity: f64,
    pub noise: NoiseConfig,
}

impl CameraModel {
    /// Camera looking down at `field`. Image rows grow toward -y.
    pub fn overhead(field: &Field, cfg: &VisionConfig) -> Result<Self> {
        cfg.validate()?;
        let s = 1.0 / cfg.meters_per_pixel;
        let (w, h) = (field.width, field.height);
        let width_px = (w * s).round() as usize + 2 * cfg.margin_px;
        let height_px = (h * s).round() as usize + 2 * cfg.margin_px;
        let projection = keystone(field, s, cfg.tilt, cfg.margin_px)
            .ok_or_else(|| Error::InvalidConfig("camera geometry is degenerate".into()))?;
        let corners = [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)];
        let markers: Vec<(Point, (f64, f64))> =
            corners.iter().map(|c| world_to_pixel(&projection, *c).map(|p| (*c, p))).collect::<Result<_>>()?;
        let homography = calibrate_homography(&markers)?;
        Ok(Self {
            width_px,
            height_px,
            projection,
            homography,
            markers,
            led_radius_px: cfg.led_radius_px,
            led_intensity: cfg.led_intensity,
            noise: cfg.noise,
        })
    }

    /// Ground distance covered by one pixel along the near edge.
    pub fn meters_per_pixel(&self) -> f64 {
        let a = self.markers[0];
        let b = self.markers[1];
        a.0.distance(&b.0) / (b.1 .0 - a.1 .0).abs()
    }
}

/// Projection mapping the field corners onto a trapezoid whose far edge is
/// narrowed by `tilt` on each side, inset by `margin` pixels.
fn keystone(field: &Field, s: f64, tilt: f64, margin: usize) -> Option<Homography> {
    let (w, h) = (field.width, field.height);
    let (wp, hp) = (w * s, h * s);
    let m = margin as f64;
    let inset = tilt * wp * 0.5;
    let pairs = [
        (Point::new(0.0, 0.0), (m, m + hp)),
        (Point::new(w, 0.0), (m + wp, m + hp)),
        (Point::new(w, h), (m + wp - inset, m)),
        (Point::new(0.0, h), (m + inset, m)),
    ];
    calibrate_homography(&pairs).ok()
}
