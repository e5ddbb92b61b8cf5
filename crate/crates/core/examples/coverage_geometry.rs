//! Grid coverage and redundancy of a few discs, checked against Monte Carlo,
//! plus lattice targets and their assignment.

use mwsn_marl::geometry::{
    assign_targets, build_coverage_map, coverage_fraction, hex_lattice_targets, monte_carlo_coverage, redundancy_rate,
    total_assigned_distance, Field, Point,
};

fn main() -> mwsn_marl::Result<()> {
    let field = Field::new(100.0, 100.0, 0.5)?;
    let discs = [Point::new(40.0, 50.0), Point::new(60.0, 50.0), Point::new(15.0, 15.0)];
    let active = [true; 3];
    let map = build_coverage_map(&discs, &active, 20.0, &field)?;
    let mc = monte_carlo_coverage(&discs, &active, 20.0, &field, 1_000_000, 7);
    println!("grid coverage {:.4}  monte carlo {:.4}", coverage_fraction(&map), mc);
    println!("redundancy {:.4}", redundancy_rate(&map));

    let sites = hex_lattice_targets(12, 20.0, &field)?;
    let drops: Vec<Point> = (0..12).map(|i| Point::new(5.0 + 7.5 * i as f64, 5.0)).collect();
    let a = assign_targets(&drops, &sites);
    println!("{} lattice sites, assigned travel {:.1} m", sites.len(), total_assigned_distance(&drops, &sites, &a));
    Ok(())
}
