//! Trains briefly, saves every agent's network, reloads and checks the greedy actions agree.

use mwsn_marl::config::RunConfig;
use mwsn_marl::rollout::{simulate, Perception, SimConfig};
use mwsn_marl::trainer::{run_training, TrainedPolicy};

fn main() -> mwsn_marl::Result<()> {
    let mut cfg = RunConfig::desk();
    cfg.train.episodes = 3;
    cfg.train.seed = 4;
    let run = run_training(&cfg.env, &cfg.train, &cfg.reward)?;
    let dir = std::env::temp_dir().join("mwsn-checkpoint-example");
    run.policy.save(&dir)?;
    let arch = cfg.train.learner.architecture(cfg.env.n_actions());
    let mut loaded = TrainedPolicy::load(&dir, cfg.env.n_sensors, &arch, cfg.train.observation)?;
    let mut original = run.policy;
    let sim = SimConfig { episodes: 2, seed: 9, ..SimConfig::default() };
    let a = simulate(&cfg.env, &cfg.reward, &mut original, &sim, Perception::GroundTruth)?;
    let b = simulate(&cfg.env, &cfg.reward, &mut loaded, &sim, Perception::GroundTruth)?;
    println!("saved to {}; rollouts identical: {}", dir.display(), a == b);
    Ok(())
}
