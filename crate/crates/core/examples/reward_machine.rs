//! Evaluates the reward branches for a handful of hand-made transitions.

use mwsn_marl::geometry::Point;
use mwsn_marl::reward::{compute_reward, RewardConfig, RewardInputs};

fn main() {
    let base = RewardInputs {
        distance_before: 30.0,
        distance_after: 30.0,
        coverage_before: 0.40,
        coverage_after: 0.40,
        battery_after: 80.0,
        battery_threshold: 20.0,
        position_after: Point::new(50.0, 50.0),
        local_overlap: 0.0,
        energy_spent: 2.5,
        coverage_floor: 0.0,
    };
    let cases = [
        ("arrived", RewardInputs { distance_after: 1.0, ..base }),
        ("coverage up", RewardInputs { coverage_after: 0.42, ..base }),
        ("closer", RewardInputs { distance_after: 25.0, ..base }),
        ("idle", base),
        ("closer, low battery", RewardInputs { distance_after: 25.0, battery_after: 10.0, ..base }),
        ("leaves target", RewardInputs { distance_before: 1.0, distance_after: 6.0, coverage_after: 0.42, ..base }),
    ];
    for (name, cfg) in [("plain", RewardConfig::default()), ("shaped", RewardConfig::shaped())] {
        println!("{name}:");
        for (label, inp) in &cases {
            let r = compute_reward(inp, &cfg);
            println!("  {label:<22} {:?} {:+.2}", r.branch, r.value);
        }
    }
}
