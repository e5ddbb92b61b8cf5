//! Reward-coefficient sensitivity sweep over {0.5, 1, 2} multipliers (27 cells).
//!
//! Usage: cargo run --release --example reward_sweep -- [episodes]

use mwsn_marl::config::RunConfig;
use mwsn_marl::trainer::sensitivity_sweep;

fn main() -> mwsn_marl::Result<()> {
    let mut cfg = RunConfig::desk();
    cfg.env.n_sensors = 9;
    cfg.env.field = mwsn_marl::geometry::Field::new(150.0, 150.0, 1.0)?;
    cfg.train.episodes = std::env::args().nth(1).map_or(10, |s| s.parse().expect("episodes"));
    let cells = sensitivity_sweep(&cfg.env, &cfg.train, &cfg.reward, &[1])?;
    let base = cells
        .iter()
        .find(|c| c.alpha_mult == 1.0 && c.beta_mult == 1.0 && c.gamma_mult == 1.0)
        .map(|c| c.final_coverage);
    for c in &cells {
        println!(
            "alpha x{:<3} beta x{:<3} gamma x{:<3} coverage {:.3} ({:+.1} pts)",
            c.alpha_mult,
            c.beta_mult,
            c.gamma_mult,
            c.final_coverage,
            100.0 * (c.final_coverage - base.unwrap_or(0.0))
        );
    }
    Ok(())
}
