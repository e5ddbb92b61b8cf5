//! Overhead-camera localization: synthetic frames, LED detection, homography
//! calibration and temporal confirmation.

mod camera;
mod detect;
mod homography;
mod render;

use std::io::Write;

use serde::Serialize;

pub use camera::{CameraModel, DetectorConfig, NoiseConfig, VisionConfig};
pub use detect::{connected_components, detect_leds, equalize, gaussian_blur, local_mean, Blob};
pub use homography::{calibrate_homography, pixel_to_world, reprojection_rms, world_to_pixel, Homography};
pub use render::{render_frame, Frame, LedStatus, RenderedLed};

use crate::env::WorldState;
use crate::error::Result;
use crate::geometry::{Field, Point};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub frame_index: usize,
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn world(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A centroid seen consistently across the frame history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confirmed {
    pub u: f64,
    pub v: f64,
    pub hits: usize,
    pub confidence: f64,
}

/// Majority-vote confirmation over the last `history.len()` frames.
///
/// Centroids are chained into tracks (each track takes at most one centroid
/// per frame, nearest within `match_radius`). A track is confirmed when it
/// has hits in at least `ceil(F / 2)` frames; its position is the mean hit.
pub fn temporal_filter(history: &[Vec<Blob>], match_radius: f64) -> Vec<Confirmed> {
    struct Track {
        su: f64,
        sv: f64,
        conf: f64,
        hits: usize,
    }
    let mut tracks: Vec<Track> = Vec::new();
    for frame in history {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, b) in frame.iter().enumerate() {
            for (ti, t) in tracks.iter().enumerate() {
                let d = (b.u - t.su / t.hits as f64).hypot(b.v - t.sv / t.hits as f64);
                if d <= match_radius {
                    pairs.push((d, bi, ti));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut blob_used = vec![false; frame.len()];
        let mut track_used = vec![false; tracks.len()];
        for (_, bi, ti) in pairs {
            if blob_used[bi] || track_used[ti] {
                continue;
            }
            blob_used[bi] = true;
            track_used[ti] = true;
            let b = frame[bi];
            let t = &mut tracks[ti];
            t.su += b.u;
            t.sv += b.v;
            t.conf += b.confidence;
            t.hits += 1;
        }
        for (bi, b) in frame.iter().enumerate() {
            if !blob_used[bi] {
                tracks.push(Track { su: b.u, sv: b.v, conf: b.confidence, hits: 1 });
            }
        }
    }
    let need = history.len().div_ceil(2).max(1);
    let mut out: Vec<Confirmed> = tracks
        .into_iter()
        .filter(|t| t.hits >= need)
        .map(|t| {
            let n = t.hits as f64;
            Confirmed { u: t.su / n, v: t.sv / n, hits: t.hits, confidence: t.conf / history.len() as f64 }
        })
        .collect();
    out.sort_by(|a, b| a.v.total_cmp(&b.v).then(a.u.total_cmp(&b.u)));
    out
}

/// Output of one camera observation of the world.
#[derive(Debug, Clone)]
pub struct WorldObservation {
    pub detections: Vec<Detection>,
    pub n_active: usize,
    /// Localization error per truly active sensor, `None` when unmatched.
    pub errors: Vec<(usize, Option<f64>)>,
    pub frames: Vec<Frame>,
}

impl WorldObservation {
    pub fn positions(&self) -> Vec<Point> {
        self.detections.iter().map(Detection::world).collect()
    }

    /// Fraction of active sensors localized within `tolerance` meters.
    pub fn localized_within(&self, tolerance: f64) -> f64 {
        if self.errors.is_empty() {
            return 1.0;
        }
        let hits = self.errors.iter().filter(|(_, e)| e.is_some_and(|e| e <= tolerance)).count();
        hits as f64 / self.errors.len() as f64
    }

    pub fn matched_errors(&self) -> Vec<f64> {
        self.errors.iter().filter_map(|(_, e)| *e).collect()
    }
}

/// Closest-pair-first matching of `a` to `b` within `gate`; returns
/// `(index in a, index in b, distance)` triples.
pub fn greedy_pairs(a: &[Point], b: &[Point], gate: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = p.distance(q);
            if d <= gate {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut ua, mut ub) = (vec![false; a.len()], vec![false; b.len()]);
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if !ua[i] && !ub[j] {
            ua[i] = true;
            ub[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// Renders `cfg.frames` frames of the current state, detects, confirms and
/// maps the confirmed centroids onto the ground plane.
pub fn observe_world(
    world: &WorldState,
    camera: &CameraModel,
    cfg: &VisionConfig,
    seed: u64,
) -> Result<WorldObservation> {
    let mut frames = Vec::with_capacity(cfg.frames);
    let mut history = Vec::with_capacity(cfg.frames);
    for k in 0..cfg.frames {
        let mut frame = render_frame(world, camera, seed::derive_seed(seed, k as u64));
        frame.index = k;
        history.push(detect_leds(&frame, &cfg.detector));
        frames.push(frame);
    }
    let confirmed = temporal_filter(&history, cfg.match_radius_px);
    let last = cfg.frames.saturating_sub(1);
    let mut detections = Vec::with_capacity(confirmed.len());
    for c in confirmed {
        let w = pixel_to_world(&camera.homography, (c.u, c.v))?;
        detections.push(Detection { frame_index: last, u: c.u, v: c.v, x: w.x, y: w.y, confidence: c.confidence });
    }

    let truth: Vec<(usize, Point)> = world.sensors.iter().filter(|s| s.active).map(|s| (s.id, s.position)).collect();
    let truth_pts: Vec<Point> = truth.iter().map(|t| t.1).collect();
    let det_pts: Vec<Point> = detections.iter().map(Detection::world).collect();
    let mut errors: Vec<(usize, Option<f64>)> = truth.iter().map(|t| (t.0, None)).collect();
    for (i, _, d) in greedy_pairs(&truth_pts, &det_pts, f64::INFINITY) {
        errors[i].1 = Some(d);
    }
    Ok(WorldObservation { n_active: detections.len(), detections, errors, frames })
}

/// Writes detections as CSV rows `frame_index,u,v,x,y,confidence`.
pub fn write_detections_csv(detections: &[Detection], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for d in detections {
        out.serialize(d)?;
    }
    out.flush()?;
    Ok(())
}

/// Keeps a position estimate per agent from vision detections.
///
/// Each step the caller supplies dead-reckoned predictions (last estimate
/// plus commanded displacement); detections are matched to predictions and
/// replace them, unmatched agents keep the prediction.
#[derive(Debug, Clone)]
pub struct VisionTracker {
    estimates: Vec<Point>,
    gate: f64,
}

impl VisionTracker {
    pub fn new(initial: Vec<Point>, gate: f64) -> Self {
        Self { estimates: initial, gate }
    }

    pub fn gate(&self) -> f64 {
        self.gate
    }

    pub fn estimates(&self) -> &[Point] {
        &self.estimates
    }

    pub fn predict(&mut self, id: usize, displacement: (f64, f64), field: &Field) {
        let p = self.estimates[id];
        self.estimates[id] = field.clamp(Point::new(p.x + displacement.0, p.y + displacement.1));
    }

    /// Matches detections to the agents in `active`; returns the number matched.
    pub fn correct(&mut self, active: &[usize], detections: &[Point]) -> usize {
        let predicted: Vec<Point> = active.iter().map(|&i| self.estimates[i]).collect();
        let pairs = greedy_pairs(&predicted, detections, self.gate);
        for &(a, d, _) in &pairs {
            self.estimates[active[a]] = detections[d];
        }
        pairs.len()
    }
}

/// Aggregate accuracy of the vision pipeline over several random deployments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisionReport {
    pub trials: usize,
    pub sensors: usize,
    pub detection_rate: f64,
    pub false_positives: usize,
    pub mean_error_m: f64,
    pub p95_error_m: f64,
    pub max_error_m: f64,
    pub within_1m: f64,
    pub homography_rms_px: f64,
    pub meters_per_pixel: f64,
}

/// Uniform positions with a minimum pairwise separation (rejection sampling,
/// falling back to plain uniform once attempts run out).
pub fn separated_positions(field: &Field, n: usize, min_sep: f64, seed: u64) -> Vec<Point> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        let p = Point::new(rng.gen::<f64>() * field.width, rng.gen::<f64>() * field.height);
        attempts += 1;
        if attempts > 1000 * n || out.iter().all(|q| q.distance(&p) >= min_sep) {
            out.push(p);
        }
    }
    out
}

/// Detection and localization statistics over `trials` deployments whose
/// sensors are at least one LED footprint apart, so that blob merging (a
/// known limitation of component labelling) does not mask localization error.
pub fn vision_selftest(
    env: &crate::env::EnvConfig,
    cfg: &VisionConfig,
    trials: usize,
    seed: u64,
) -> Result<VisionReport> {
    let camera = CameraModel::overhead(&env.field, cfg)?;
    let rms = reprojection_rms(&camera.homography, &camera.markers)?;
    let (mut active, mut detected, mut within, mut false_pos) = (0usize, 0usize, 0usize, 0usize);
    let mut errors = Vec::new();
    let separation = 4.0 * cfg.led_radius_px * cfg.meters_per_pixel;
    for t in 0..trials {
        let positions =
            separated_positions(&env.field, env.n_sensors, separation, seed::stream(seed, "vision-world", t as u64));
        let world = crate::env::deploy_at(env, &positions)?;
        let obs = observe_world(&world, &camera, cfg, seed::stream(seed, "vision-frames", t as u64))?;
        active += obs.errors.len();
        // A detection paired with a sensor further than the LED footprint is a miss.
        let gate = 4.0 * cfg.led_radius_px * cfg.meters_per_pixel;
        let good: Vec<f64> = obs.matched_errors().into_iter().filter(|e| *e <= gate).collect();
        detected += good.len();
        within += good.iter().filter(|e| **e <= 1.0).count();
        false_pos += obs.detections.len().saturating_sub(good.len());
        errors.extend(good);
    }
    errors.sort_by(f64::total_cmp);
    let mean = if errors.is_empty() { f64::NAN } else { errors.iter().sum::<f64>() / errors.len() as f64 };
    let p95 = if errors.is_empty() {
        f64::NAN
    } else {
        errors[((errors.len() as f64 * 0.95).ceil() as usize).clamp(1, errors.len()) - 1]
    };
    let denom = active.max(1) as f64;
    Ok(VisionReport {
        trials,
        sensors: env.n_sensors,
        detection_rate: detected as f64 / denom,
        false_positives: false_pos,
        mean_error_m: mean,
        p95_error_m: p95,
        max_error_m: errors.last().copied().unwrap_or(f64::NAN),
        within_1m: within as f64 / denom,
        homography_rms_px: rms,
        meters_per_pixel: camera.meters_per_pixel(),
    })
}
