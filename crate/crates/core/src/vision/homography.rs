//! Planar homography estimation (normalized DLT) and application.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub type Homography = Matrix3<f64>;

/// Maps a world point to pixel coordinates.
pub fn world_to_pixel(h: &Homography, p: Point) -> Result<(f64, f64)> {
    apply(h, p.x, p.y)
}

/// Maps a pixel back to the ground plane through `h⁻¹`.
pub fn pixel_to_world(h: &Homography, pixel: (f64, f64)) -> Result<Point> {
    let inv = h.try_inverse().ok_or_else(|| Error::DegenerateHomography("matrix is singular".into()))?;
    let (x, y) = apply(&inv, pixel.0, pixel.1)?;
    Ok(Point::new(x, y))
}

fn apply(h: &Homography, x: f64, y: f64) -> Result<(f64, f64)> {
    let v = h * Vector3::new(x, y, 1.0);
    let scale = v.x.abs().max(v.y.abs()).max(1.0);
    if v.z.abs() <= 1e-12 * scale {
        return Err(Error::PointAtInfinity);
    }
    Ok((v.x / v.z, v.y / v.z))
}

fn collinear(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let scale = [(b.0 - a.0), (b.1 - a.1), (c.0 - a.0), (c.1 - a.1)].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    cross.abs() <= 1e-9 * scale * scale
}

/// Similarity transform taking points to zero mean and mean distance √2.
fn normalizer(pts: &[(f64, f64)]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.0 / n, sy + p.1 / n));
    let mean_d = pts.iter().map(|p| ((p.0 - mx).powi(2) + (p.1 - my).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_d > 0.0 { std::f64::consts::SQRT_2 / mean_d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let v = t * Vector3::new(p.0, p.1, 1.0);
    (v.x / v.z, v.y / v.z)
}

/// Direct linear transform from world↔pixel pairs, scaled so `h[(2,2)] = 1`.
pub fn calibrate_homography(pairs: &[(Point, (f64, f64))]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::DegenerateHomography(format!("need at least 4 correspondences, got {}", pairs.len())));
    }
    let world: Vec<(f64, f64)> = pairs.iter().map(|(w, _)| (w.x, w.y)).collect();
    let pixel: Vec<(f64, f64)> = pairs.iter().map(|(_, p)| *p).collect();
    if pairs.iter().any(|(w, p)| !(w.x.is_finite() && w.y.is_finite() && p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite("homography correspondences"));
    }
    for pts in [&world, &pixel] {
        let n = pts.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if collinear(pts[i], pts[j], pts[k]) {
                        return Err(Error::DegenerateHomography(format!("points {i}, {j}, {k} are collinear")));
                    }
                }
            }
        }
    }

    let tw = normalizer(&world);
    let tp = normalizer(&pixel);
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (w, p)) in world.iter().zip(&pixel).enumerate() {
        let (x, y) = transform(&tw, *w);
        let (u, v) = transform(&tp, *p);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateHomography("SVD failed".into()))?;
    let (min_idx, _) =
        svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nine singular values");
    let h = v_t.row(min_idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let tp_inv = tp.try_inverse().expect("similarity is invertible");
    let mut full = tp_inv * hn * tw;
    let corner = full[(2, 2)];
    let norm = full.abs().max();
    if corner.abs() <= 1e-12 * norm {
        return Err(Error::DegenerateHomography("bottom-right entry vanishes".into()));
    }
    full /= corner;
    let det = full.determinant();
    if !det.is_finite() || det.abs() <= 1e-12 * full.abs().max().powi(3) {
        return Err(Error::DegenerateHomography("estimated matrix is singular".into()));
    }
    Ok(full)
}

/// Root-mean-square reprojection error in pixels.
pub fn reprojection_rms(h: &Homography, pairs: &[(Point, (f64, f64))]) -> Result<f64> {
    let mut sq = 0.0;
    for (w, p) in pairs {
        let (u, v) = world_to_pixel(h, *w)?;
        sq += (u - p.0).powi(2) + (v - p.1).powi(2);
    }
    Ok((sq / pairs.len().max(1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs_from(h: &Homography, world: &[Point]) -> Vec<(Point, (f64, f64))> {
        world.iter().map(|w| (*w, world_to_pixel(h, *w).unwrap())).collect()
    }

    fn corners() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(500.0, 0.0), Point::new(500.0, 500.0), Point::new(0.0, 500.0)]
    }

    #[test]
    fn identity_correspondences_give_identity() {
        let h = calibrate_homography(&pairs_from(&Matrix3::identity(), &corners())).unwrap();
        assert!((h - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn recovers_synthetic_homography() {
        let h0 = Matrix3::new(1.9, 0.12, 15.0, -0.05, -2.1, 1030.0, 1e-4, -2e-4, 1.0);
        let pairs = pairs_from(&h0, &corners());
        let h = calibrate_homography(&pairs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rel = (h[(i, j)] - h0[(i, j)]).abs() / h0[(i, j)].abs().max(1e-3);
                assert!(rel < 1e-6, "entry ({i},{j}): {} vs {}", h[(i, j)], h0[(i, j)]);
            }
        }
        assert!(reprojection_rms(&h, &pairs).unwrap() < 1e-6);
    }

    #[test]
    fn collinear_points_rejected() {
        let world = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0), Point::new(0.0, 5.0)];
        let err = calibrate_homography(&pairs_from(&Matrix3::identity(), &world)).unwrap_err();
        assert!(matches!(err, Error::DegenerateHomography(_)));
        assert!(calibrate_homography(&pairs_from(&Matrix3::identity(), &world[..3])).is_err());
    }

    #[test]
    fn pixel_to_world_inverts_scaling() {
        let h = Matrix3::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        let p = pixel_to_world(&h, (10.0, 10.0)).unwrap();
        assert!((p.x - 5.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
        let id = pixel_to_world(&Matrix3::identity(), (3.5, -2.0)).unwrap();
        assert_eq!((id.x, id.y), (3.5, -2.0));
    }

    #[test]
    fn horizon_maps_to_infinity() {
        let h = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0);
        assert!(matches!(world_to_pixel(&h, Point::new(-100.0, 3.0)), Err(Error::PointAtInfinity)));
    }
}
