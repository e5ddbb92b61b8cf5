//! Trains a short desk run and compares it against the baselines.
//!
//! Usage: cargo run --release --example compare_baselines -- [episodes] [seeds]

use mwsn_marl::config::RunConfig;
use mwsn_marl::metrics::{compare_methods, write_comparison_csv, CompareConfig, Method};

fn main() -> mwsn_marl::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::desk();
    cfg.train.episodes = args.next().map_or(60, |s| s.parse().expect("episodes"));
    let n_seeds: u64 = args.next().map_or(2, |s| s.parse().expect("seeds"));
    let seeds: Vec<u64> = (1..=n_seeds).collect();
    let cc = CompareConfig { sim: cfg.eval, train: cfg.train.clone(), ..CompareConfig::default() };
    let methods = [Method::Trained, Method::Random, Method::StaticGrid, Method::Greedy];
    let reports = compare_methods(&cfg.env, &cfg.reward, &methods, &seeds, &cc)?;
    write_comparison_csv(&reports, std::io::stdout())
}
