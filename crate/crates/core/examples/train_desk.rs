//! Trains the 25-sensor desk scenario and prints the learning curve.
//!
//! Usage: cargo run --release --example train_desk -- [episodes] [seed]

use mwsn_marl::config::RunConfig;
use mwsn_marl::trainer::Trainer;

fn main() -> mwsn_marl::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::desk();
    if let Some(e) = args.next() {
        cfg.train.episodes = e.parse().expect("episodes");
    }
    cfg.train.seed = args.next().map_or(1, |s| s.parse().expect("seed"));
    let mut t = Trainer::new(cfg.env, cfg.train, cfg.reward, cfg.vision)?;
    println!("episode coverage redundancy energy mean_reward epsilon seconds");
    while t.episode < t.train.episodes {
        let l = t.run_episode()?;
        println!(
            "{:>4} {:.4} {:.4} {:>8.1} {:>7.3} {:.3} {:.2}",
            l.episode, l.coverage, l.redundancy, l.energy, l.mean_reward, l.epsilon, l.wall_clock_s
        );
    }
    Ok(())
}
