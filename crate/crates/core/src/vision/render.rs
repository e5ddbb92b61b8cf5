//! Synthetic overhead frames: Gaussian LED blobs over a lit, noisy ground plane.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::camera::CameraModel;
use super::homography::world_to_pixel;
use crate::env::WorldState;
use crate::error::Result;
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedStatus {
    Drawn,
    Occluded,
    OutOfFrame,
    Inactive,
}

/// Ground-truth record for one sensor in a rendered frame. Only used for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedLed {
    pub sensor_id: usize,
    pub world: Point,
    pub pixel: Option<(f64, f64)>,
    pub status: LedStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub index: usize,
    pub truth: Vec<RenderedLed>,
}

impl Frame {
    pub fn blank(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0.0; width * height], index: 0, truth: Vec::new() }
    }

    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.pixels[v * self.width + u]
    }

    /// Binary PGM (P5), 8 bits per pixel.
    pub fn write_pgm(&self, mut w: impl Write) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Adds a Gaussian spot centered at pixel coordinates `(u, v)`; pixel
    /// `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
    pub fn add_blob(&mut self, u: f64, v: f64, sigma: f64, peak: f64) {
        let reach = (4.0 * sigma).ceil() as i64;
        let (cu, cv) = (u.floor() as i64, v.floor() as i64);
        for j in (cv - reach).max(0)..=(cv + reach).min(self.height as i64 - 1) {
            for i in (cu - reach).max(0)..=(cu + reach).min(self.width as i64 - 1) {
                let du = i as f64 + 0.5 - u;
                let dv = j as f64 + 0.5 - v;
                self.pixels[j as usize * self.width + i as usize] +=
                    peak * (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
}

/// Renders the active sensors of `world` as seen by `camera`.
pub fn render_frame(world: &WorldState, camera: &CameraModel, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (camera.width_px, camera.height_px);
    let noise = &camera.noise;
    let mut frame = Frame::blank(w, h);
    for v in 0..h {
        for u in 0..w {
            let ramp = (u as f64 + 0.5) / w as f64 * 0.6 + (v as f64 + 0.5) / h as f64 * 0.4;
            frame.pixels[v * w + u] = noise.background + noise.gradient * ramp;
        }
    }
    let sigma = camera.led_radius_px / 2.0;
    for s in &world.sensors {
        let occluded = rng.gen::<f64>() < noise.occlusion;
        let projected = world_to_pixel(&camera.projection, s.position).ok();
        let inside = projected.is_some_and(|(u, v)| u >= 0.0 && v >= 0.0 && u <= w as f64 && v <= h as f64);
        let status = if !s.active {
            LedStatus::Inactive
        } else if !inside {
            LedStatus::OutOfFrame
        } else if occluded {
            LedStatus::Occluded
        } else {
            LedStatus::Drawn
        };
        if status == LedStatus::Drawn {
            let (u, v) = projected.unwrap();
            frame.add_blob(u, v, sigma, camera.led_intensity);
        }
        frame.truth.push(RenderedLed { sensor_id: s.id, world: s.position, pixel: projected, status });
    }
    if noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma).expect("finite noise sigma");
        for p in &mut frame.pixels {
            *p += normal.sample(&mut rng);
        }
    }
    for p in &mut frame.pixels {
        *p = p.clamp(0.0, 1.0);
    }
    frame
}
