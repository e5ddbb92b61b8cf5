//! Steps the environment by hand: move one sensor, fail another, check connectivity.

use std::collections::BTreeMap;

use mwsn_marl::env::{connectivity_check, inject_failure, reset, step, EnvConfig};
use mwsn_marl::geometry::Field;

fn main() -> mwsn_marl::Result<()> {
    let env = EnvConfig { field: Field::new(200.0, 200.0, 1.0)?, n_sensors: 12, ..EnvConfig::default() };
    let mut world = reset(&env, 3)?;
    println!("start: coverage {:.3}, battery {:.1}", world.coverage_fraction(), world.total_battery());
    let actions = env.actions();
    for t in 0..5 {
        // Everyone heads north-east.
        let cmds: BTreeMap<_, _> = world.sensors.iter().filter(|s| s.active).map(|s| (s.id, actions[2])).collect();
        world = step(&world, &cmds, &env)?;
        println!("step {t}: coverage {:.3}, battery {:.1}", world.coverage_fraction(), world.total_battery());
    }
    world = inject_failure(&world, 0, &env)?;
    let c = connectivity_check(&world, env.comm_range);
    println!("after failure: {} active, {} components", world.n_active, c.components);
    Ok(())
}
