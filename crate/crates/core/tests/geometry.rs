use std::collections::BTreeMap;
use std::f64::consts::PI;

use mwsn_marl::env::{self, Action, EnvConfig};
use mwsn_marl::geometry::{
    assign_targets, build_coverage_map, coverage_fraction, hex_lattice_targets, min_cost_assignment,
    monte_carlo_coverage, redundancy_rate, total_assigned_distance, CoverageMap, Field, Point,
};
use mwsn_marl::vision::{calibrate_homography, pixel_to_world, world_to_pixel};
use proptest::prelude::*;

fn lens(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

#[test]
fn grid_single_disc_matches_area() {
    let field = Field::new(250.0, 250.0, 1.0).unwrap();
    for r in [10.0, 20.0, 35.0] {
        let map = build_coverage_map(&[Point::new(125.0, 125.0)], &[true], r, &field).unwrap();
        let exact = PI * r * r / field.area();
        let got = coverage_fraction(&map);
        assert!((got - exact).abs() / exact < 0.02, "r {r}: {got} vs {exact}");
    }
}

#[test]
fn twin_disc_redundancy() {
    let field = Field::new(250.0, 250.0, 1.0).unwrap();
    let pts = [Point::new(115.0, 125.0), Point::new(135.0, 125.0)];
    let map = build_coverage_map(&pts, &[true, true], 20.0, &field).unwrap();
    let l = lens(20.0, 20.0);
    let exact = l / (2.0 * PI * 400.0 - l);
    assert!((exact - 0.243).abs() < 5e-4);
    let got = redundancy_rate(&map);
    assert!((got - 0.243).abs() / 0.243 < 0.02, "{got}");
}

#[test]
fn monte_carlo_within_three_sigma_of_exact() {
    let field = Field::new(100.0, 100.0, 1.0).unwrap();
    let pts = [Point::new(40.0, 50.0), Point::new(65.0, 50.0)];
    let l = lens(20.0, 25.0);
    let p = (2.0 * PI * 400.0 - l) / field.area();
    let n = 1_000_000;
    let mc = monte_carlo_coverage(&pts, &[true, true], 20.0, &field, n, 17);
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((mc - p).abs() <= 3.0 * sigma, "{mc} vs {p} (sigma {sigma})");
}

#[test]
fn sparse_hex_lattice_is_tangent_and_disjoint() {
    let field = Field::new(250.0, 250.0, 1.0).unwrap();
    let sites = hex_lattice_targets(25, 20.0, &field).unwrap();
    assert_eq!(sites.len(), 25);
    assert!(sites.iter().all(|p| field.contains(p)));
    let nearest = sites
        .iter()
        .enumerate()
        .flat_map(|(i, a)| sites[i + 1..].iter().map(move |b| a.distance(b)))
        .fold(f64::INFINITY, f64::min);
    assert!((nearest - 40.0).abs() < 1e-9, "{nearest}");
    let map = build_coverage_map(&sites, &[true; 25], 20.0, &field).unwrap();
    let exact = 25.0 * PI * 400.0 / field.area();
    assert!((coverage_fraction(&map) - exact).abs() / exact < 0.02);
    assert!(redundancy_rate(&map) < 0.01);
}

#[test]
fn homography_of_pure_scale() {
    let pairs: Vec<(Point, (f64, f64))> = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (5.0, 3.0)]
        .iter()
        .map(|&(x, y)| (Point::new(x, y), (2.0 * x + 7.0, 2.0 * y - 1.0)))
        .collect();
    let h = calibrate_homography(&pairs).unwrap();
    let (u, v) = world_to_pixel(&h, Point::new(3.0, 4.0)).unwrap();
    assert!((u - 13.0).abs() < 1e-9 && (v - 7.0).abs() < 1e-9);
}

#[test]
fn degenerate_calibration_rejected() {
    let collinear: Vec<(Point, (f64, f64))> =
        (0..5).map(|i| (Point::new(i as f64, i as f64), (i as f64, i as f64))).collect();
    assert!(calibrate_homography(&collinear).is_err());
    assert!(calibrate_homography(&collinear[..3]).is_err());
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    fn go(row: usize, used: &mut Vec<bool>, cost: &[Vec<f64>]) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cost[row].len() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[row][c] + go(row + 1, used, cost));
                used[c] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; cost[0].len()], cost)
}

fn small_world() -> EnvConfig {
    EnvConfig {
        field: Field::new(60.0, 60.0, 1.0).unwrap(),
        n_sensors: 4,
        steps_per_episode: 20,
        ..EnvConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hungarian_is_optimal(n in 1usize..6, extra in 0usize..2, vals in prop::collection::vec(0.0f64..100.0, 48)) {
        let m = n + extra;
        let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| vals[i * 7 + j]).collect()).collect();
        let a = min_cost_assignment(&cost);
        let mut seen = a.clone();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), n);
        let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        prop_assert!((got - brute_force(&cost)).abs() < 1e-9);
    }

    #[test]
    fn assignment_never_worse_than_identity(coords in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 10)) {
        let pos: Vec<Point> = coords[..5].iter().map(|&(x, y)| Point::new(x, y)).collect();
        let sites: Vec<Point> = coords[5..].iter().map(|&(x, y)| Point::new(x, y)).collect();
        let a = assign_targets(&pos, &sites);
        let identity: Vec<usize> = (0..5).collect();
        prop_assert!(total_assigned_distance(&pos, &sites, &a) <= total_assigned_distance(&pos, &sites, &identity) + 1e-9);
    }

    #[test]
    fn add_then_remove_restores_empty(discs in prop::collection::vec((0.0f64..80.0, 0.0f64..80.0, 1.0f64..30.0), 1..8)) {
        let field = Field::new(80.0, 80.0, 1.0).unwrap();
        let mut map = CoverageMap::empty(field);
        for &(x, y, r) in &discs {
            map.add_disc(Point::new(x, y), r);
        }
        prop_assert!(map.overlapped_cells() <= map.covered_cells());
        for &(x, y, r) in discs.iter().rev() {
            map.remove_disc(Point::new(x, y), r);
        }
        prop_assert_eq!(map.covered_cells(), 0);
        prop_assert!(map.counts().iter().all(|c| *c == 0));
    }

    #[test]
    fn homography_round_trip(h in prop::collection::vec(-0.3f64..0.3, 8), x in 0.0f64..100.0, y in 0.0f64..100.0) {
        let mut m = nalgebra::Matrix3::new(4.0 + h[0], h[1], 10.0 + 10.0 * h[2], h[3], 4.0 + h[4], 20.0 + 10.0 * h[5], 1e-4 * h[6], 1e-4 * h[7], 1.0);
        m /= m[(2, 2)];
        let px = world_to_pixel(&m, Point::new(x, y)).unwrap();
        let back = pixel_to_world(&m, px).unwrap();
        prop_assert!(back.distance(&Point::new(x, y)) < 1e-8);
    }

    #[test]
    fn step_keeps_sensors_in_field_and_batteries_consistent(seed in 0u64..500, choices in prop::collection::vec(0usize..9, 80)) {
        let cfg = small_world();
        let actions = cfg.actions();
        let mut world = env::reset(&cfg, seed).unwrap();
        for t in 0..20 {
            let mut step: BTreeMap<usize, Action> = BTreeMap::new();
            for s in world.sensors.iter().filter(|s| s.active) {
                step.insert(s.id, actions[choices[(t * 4 + s.id) % choices.len()]]);
            }
            let next = env::step(&world, &step, &cfg).unwrap();
            for (b, a) in world.sensors.iter().zip(&next.sensors) {
                prop_assert!(cfg.field.contains(&a.position));
                prop_assert!(a.battery >= 0.0 && a.battery <= b.battery);
                if b.active && a.active {
                    let spent = b.battery - a.battery;
                    prop_assert!((spent - cfg.energy_per_meter * b.position.distance(&a.position)).abs() < 1e-9);
                }
            }
            let rebuilt = build_coverage_map(&next.positions(), &next.active_flags(), cfg.sensing_radius, &cfg.field).unwrap();
            prop_assert_eq!(rebuilt.counts(), next.coverage.counts());
            world = next;
        }
    }
}

#[test]
fn reset_is_deterministic() {
    let cfg = small_world();
    assert_eq!(env::reset(&cfg, 3).unwrap().positions(), env::reset(&cfg, 3).unwrap().positions());
    assert_ne!(env::reset(&cfg, 3).unwrap().positions(), env::reset(&cfg, 4).unwrap().positions());
}
