//! Recovery time after clustered sensor failures for the greedy and random-walk baselines.

use mwsn_marl::baselines::{GreedyCoverage, RandomWalk};
use mwsn_marl::env::EnvConfig;
use mwsn_marl::geometry::Field;
use mwsn_marl::metrics::{recovery_time, RecoveryConfig};
use mwsn_marl::reward::RewardConfig;

fn main() -> mwsn_marl::Result<()> {
    let env = EnvConfig {
        field: Field::new(120.0, 120.0, 1.0)?,
        n_sensors: 25,
        steps_per_episode: 100,
        ..EnvConfig::default()
    };
    let reward = RewardConfig::shaped();
    let cfg = RecoveryConfig { trials: 6, failures: 6, clustered: true, ..RecoveryConfig::default() };
    for (name, report) in [
        ("greedy", recovery_time(&mut GreedyCoverage, &env, &reward, &cfg, 1)?),
        ("random", recovery_time(&mut RandomWalk::new(1), &env, &reward, &cfg, 1)?),
    ] {
        println!(
            "{name:<7} median {:>6} s  censored {:.0}%",
            report.median().map_or("-".into(), |m| format!("{m:.0}")),
            100.0 * report.censored_fraction()
        );
    }
    Ok(())
}
