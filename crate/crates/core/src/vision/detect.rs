//! Classical LED detector: equalize, blur, adaptive threshold, label, measure.

use super::camera::DetectorConfig;
use super::render::Frame;

/// One detected bright component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub u: f64,
    pub v: f64,
    pub area: usize,
    pub confidence: f64,
}

/// Global histogram equalization over 256 levels.
pub fn equalize(pixels: &[f64]) -> Vec<f64> {
    let bins: Vec<usize> = pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as usize).collect();
    let mut hist = [0usize; 256];
    for &b in &bins {
        hist[b] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let n = pixels.len();
    if n == cdf_min {
        return vec![0.0; n];
    }
    let denom = (n - cdf_min) as f64;
    bins.iter().map(|&b| (cdf[b] - cdf_min) as f64 / denom).collect()
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(pixels: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return pixels.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let mut tmp = vec![0.0; pixels.len()];
    for v in 0..height {
        let row = &pixels[v * width..(v + 1) * width];
        for u in 0..width {
            let mut s = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let x = (u as i64 + k as i64 - r).clamp(0, width as i64 - 1) as usize;
                s += w * row[x];
            }
            tmp[v * width + u] = s;
        }
    }
    let mut out = vec![0.0; pixels.len()];
    for v in 0..height {
        for u in 0..width {
            let mut s = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let y = (v as i64 + k as i64 - r).clamp(0, height as i64 - 1) as usize;
                s += w * tmp[y * width + u];
            }
            out[v * width + u] = s;
        }
    }
    out
}

/// Mean over a `window`-sized square around each pixel, clipped at the borders.
pub fn local_mean(pixels: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let w1 = width + 1;
    let mut integral = vec![0.0; w1 * (height + 1)];
    for v in 0..height {
        let mut row = 0.0;
        for u in 0..width {
            row += pixels[v * width + u];
            integral[(v + 1) * w1 + u + 1] = integral[v * w1 + u + 1] + row;
        }
    }
    let half = window / 2;
    let mut out = vec![0.0; pixels.len()];
    for v in 0..height {
        let (y0, y1) = (v.saturating_sub(half), (v + half + 1).min(height));
        for u in 0..width {
            let (x0, x1) = (u.saturating_sub(half), (u + half + 1).min(width));
            let sum = integral[y1 * w1 + x1] - integral[y0 * w1 + x1] - integral[y1 * w1 + x0] + integral[y0 * w1 + x0];
            out[v * width + u] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// 8-connected labelling of a binary mask; returns pixel index lists.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (u, v) = ((i % width) as i64, (i / width) as i64);
            for dv in -1..=1 {
                for du in -1..=1 {
                    let (x, y) = (u + du, v + dv);
                    if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                        continue;
                    }
                    let j = y as usize * width + x as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        components.push(members);
    }
    components
}

/// Runs the detector on one frame. Output is sorted by `(v, u)`.
pub fn detect_leds(frame: &Frame, cfg: &DetectorConfig) -> Vec<Blob> {
    let (w, h) = (frame.width, frame.height);
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let eq = equalize(&frame.pixels);
    let blurred = gaussian_blur(&eq, w, h, cfg.blur_sigma);
    let mean = local_mean(&blurred, w, h, cfg.window);
    let mask: Vec<bool> = blurred.iter().zip(&mean).map(|(b, m)| *b > m + cfg.offset).collect();
    let raw_mean = local_mean(&frame.pixels, w, h, cfg.window);

    let mut blobs: Vec<Blob> = connected_components(&mask, w, h)
        .into_iter()
        .filter(|c| (cfg.min_area..=cfg.max_area).contains(&c.len()))
        .map(|members| {
            let (mut sw, mut su, mut sv, mut peak) = (0.0, 0.0, 0.0, 0.0f64);
            for &i in &members {
                let weight = (frame.pixels[i] - raw_mean[i]).max(0.0);
                let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                sw += weight;
                su += weight * u;
                sv += weight * v;
                peak = peak.max(weight);
            }
            if sw <= 0.0 {
                let n = members.len() as f64;
                sw = n;
                su = members.iter().map(|&i| (i % w) as f64 + 0.5).sum();
                sv = members.iter().map(|&i| (i / w) as f64 + 0.5).sum();
            }
            Blob { u: su / sw, v: sv / sw, area: members.len(), confidence: (2.0 * peak).min(1.0) }
        })
        .collect();
    blobs.sort_by(|a, b| a.v.total_cmp(&b.v).then(a.u.total_cmp(&b.u)));
    blobs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_frame_has_no_detections() {
        let f = Frame::blank(64, 64);
        assert!(detect_leds(&f, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn equalization_spreads_levels() {
        let eq = equalize(&[0.0, 0.0, 0.5, 1.0]);
        assert_eq!(eq, vec![0.0, 0.0, 0.5, 1.0]);
        assert_eq!(equalize(&[0.3; 5]), vec![0.0; 5]);
    }

    #[test]
    fn local_mean_of_constant_is_constant() {
        let m = local_mean(&[2.0; 30], 6, 5, 3);
        assert!(m.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let mut mask = vec![false; 16];
        mask[0] = true;
        mask[5] = true;
        mask[15] = true;
        let cc = connected_components(&mask, 4, 4);
        assert_eq!(cc.len(), 2);
    }

    #[test]
    fn noiseless_blobs_found_within_a_pixel() {
        let mut f = Frame::blank(120, 80);
        let truth = [(20.3, 15.7), (90.0, 40.2), (55.5, 66.6)];
        for (u, v) in truth {
            f.add_blob(u, v, 1.5, 0.8);
        }
        let found = detect_leds(&f, &DetectorConfig::default());
        assert_eq!(found.len(), 3);
        for (u, v) in truth {
            assert!(found.iter().any(|b| (b.u - u).hypot(b.v - v) < 1.0));
        }
        assert!(found.windows(2).all(|p| p[0].v <= p[1].v));
    }

    #[test]
    fn adjacent_blobs_merge() {
        let mut f = Frame::blank(60, 60);
        f.add_blob(30.0, 30.0, 1.5, 0.8);
        f.add_blob(31.0, 30.0, 1.5, 0.8);
        assert_eq!(detect_leds(&f, &DetectorConfig::default()).len(), 1);
    }
}
