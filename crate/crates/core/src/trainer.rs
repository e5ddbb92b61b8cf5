//! Multi-agent training loop: independent Double-DQN learners, one per sensor.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::{encode_observation, Agent, LearnerConfig, ObservationConfig, Percept};
use crate::env::{EnvConfig, WorldState};
use crate::error::{Error, Result};
use crate::metrics::network_lifetime;
use crate::nn::{argmax, Architecture, QNetwork};
use crate::replay::Transition;
use crate::reward::RewardConfig;
use crate::rollout::{deploy, Controller, Deployment, EpisodeLog, EpisodeTally, Perception, Rollout};
use crate::vision::VisionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub convergence_window: usize,
    pub convergence_threshold: f64,
    /// Agents observe vision estimates instead of true positions.
    pub vision: bool,
    /// Fresh random deployment (positions, batteries, targets) every episode.
    pub redeploy_each_episode: bool,
    /// Environment steps between learner updates.
    pub learn_every: usize,
    pub seed: u64,
    pub learner: LearnerConfig,
    pub observation: ObservationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            epsilon_start: 1.0,
            epsilon_min: 0.1,
            epsilon_decay: 0.98855,
            convergence_window: 20,
            convergence_threshold: 0.01,
            vision: false,
            redeploy_each_episode: false,
            learn_every: 1,
            seed: 0,
            learner: LearnerConfig::default(),
            observation: ObservationConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon_decay must lie in (0, 1), got {}", self.epsilon_decay)));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return Err(Error::InvalidConfig("need 0 < epsilon_min <= epsilon_start <= 1".into()));
        }
        if self.convergence_window < 2 || self.learn_every == 0 {
            return Err(Error::InvalidConfig("convergence_window must be >= 2 and learn_every >= 1".into()));
        }
        self.learner.validate()
    }

    /// Epsilon after `decays` multiplicative decays.
    pub fn epsilon_after(&self, decays: usize) -> f64 {
        let mut eps = self.epsilon_start;
        for _ in 0..decays {
            eps = (eps * self.epsilon_decay).max(self.epsilon_min);
        }
        eps
    }
}

/// Training state: the world, one learner per sensor and the episode log.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub reward: RewardConfig,
    pub agents: Vec<Agent>,
    pub rollout: Rollout,
    pub epsilon: f64,
    pub episode: usize,
    pub logs: Vec<EpisodeLog>,
    pub transitions_stored: usize,
    pub decays_applied: usize,
    global_step: u64,
}

impl Trainer {
    pub fn new(env: EnvConfig, train: TrainConfig, reward: RewardConfig, vision: VisionConfig) -> Result<Self> {
        env.validate()?;
        train.validate()?;
        reward.validate()?;
        let world = deploy(&env, Deployment::Random, train.seed, 0)?;
        let perception = if train.vision {
            Perception::vision(&env, vision, &world, crate::seed::stream(train.seed, "camera", 0))?
        } else {
            Perception::GroundTruth
        };
        let rollout = Rollout::new(world, perception, &env)?;
        let n_actions = env.n_actions();
        let agents = (0..env.n_sensors).map(|i| Agent::new(i, n_actions, &train.learner, train.seed)).collect();
        Ok(Self {
            epsilon: train.epsilon_start,
            env,
            reward,
            agents,
            rollout,
            episode: 0,
            logs: Vec::new(),
            transitions_stored: 0,
            decays_applied: 0,
            global_step: 0,
            train,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.rollout.world
    }

    fn beta(&self) -> f64 {
        let progress = self.episode as f64 / (self.train.episodes.max(2) - 1) as f64;
        self.train.learner.replay.beta_at(progress)
    }

    /// Runs one episode of `steps_per_episode` steps and appends its log.
    pub fn run_episode(&mut self) -> Result<&EpisodeLog> {
        let started = Instant::now();
        let (env, obs_cfg) = (&self.env, self.train.observation);
        if self.episode > 0 && self.train.redeploy_each_episode {
            let world = deploy(env, Deployment::Random, self.train.seed, self.episode)?;
            self.rollout.redeploy(world, env)?;
        }
        self.rollout.world.episode = self.episode;
        let beta = self.beta();
        let mut tally = EpisodeTally::new(env.n_sensors);
        for _ in 0..env.steps_per_episode {
            if self.rollout.world.n_active == 0 {
                break;
            }
            let epsilon = self.epsilon;
            let agents = &mut self.agents;
            let rec = self.rollout.step_with(env, &self.reward, |id, p, _| {
                agents[id].act(&encode_observation(p, env, &obs_cfg), epsilon)
            })?;
            tally.add(&rec);
            for a in &rec.agents {
                self.agents[a.id].remember(Transition {
                    obs: encode_observation(&a.before, env, &obs_cfg),
                    action: a.action,
                    reward: a.reward,
                    next_obs: encode_observation(&a.after, env, &obs_cfg),
                    terminal: a.terminal,
                });
                self.transitions_stored += 1;
            }
            self.global_step += 1;
            if self.global_step.is_multiple_of(self.train.learn_every as u64) {
                for a in &rec.agents {
                    let agent = &mut self.agents[a.id];
                    if agent.buffer.len() >= self.train.learner.batch {
                        tally.td_sum += agent.learn(&self.train.learner, beta)?;
                        tally.td_count += 1;
                    }
                }
            }
        }
        let learner_steps = self.agents.iter().map(|a| a.learner_steps).sum();
        let mut log = tally.finish(self.episode, &self.rollout.world, self.epsilon, learner_steps);
        log.wall_clock_s = started.elapsed().as_secs_f64();
        self.logs.push(log);
        self.epsilon = (self.epsilon * self.train.epsilon_decay).max(self.train.epsilon_min);
        self.decays_applied += 1;
        self.episode += 1;
        Ok(self.logs.last().expect("just pushed"))
    }

    /// Runs the remaining episodes.
    pub fn run(&mut self) -> Result<()> {
        while self.episode < self.train.episodes {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn policy(&self) -> TrainedPolicy {
        TrainedPolicy {
            networks: self.agents.iter().map(|a| a.online.clone()).collect(),
            observation: self.train.observation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub policy: TrainedPolicy,
    pub logs: Vec<EpisodeLog>,
    pub convergence: Option<usize>,
}

/// Trains from scratch with the given configuration.
pub fn run_training(env: &EnvConfig, train: &TrainConfig, reward: &RewardConfig) -> Result<TrainingRun> {
    run_training_with_vision(env, train, reward, &VisionConfig::default())
}

pub fn run_training_with_vision(
    env: &EnvConfig,
    train: &TrainConfig,
    reward: &RewardConfig,
    vision: &VisionConfig,
) -> Result<TrainingRun> {
    let mut t = Trainer::new(env.clone(), train.clone(), reward.clone(), *vision)?;
    t.run()?;
    let rewards: Vec<f64> = t.logs.iter().map(|l| l.mean_reward).collect();
    let convergence = detect_convergence(&rewards, train.convergence_window, train.convergence_threshold);
    Ok(TrainingRun { policy: t.policy(), logs: t.logs, convergence })
}

/// Greedy (epsilon = 0) policy from trained online networks.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub networks: Vec<QNetwork>,
    pub observation: ObservationConfig,
}

impl TrainedPolicy {
    fn checkpoint_path(dir: &Path, id: usize) -> PathBuf {
        dir.join(format!("agent_{id:03}.qnet"))
    }

    /// One checkpoint file per agent.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (id, net) in self.networks.iter().enumerate() {
            let f = std::fs::File::create(Self::checkpoint_path(dir, id))?;
            let mut w = std::io::BufWriter::new(f);
            net.save(&mut w)?;
            std::io::Write::flush(&mut w)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, n_agents: usize, arch: &Architecture, observation: ObservationConfig) -> Result<Self> {
        let networks = (0..n_agents)
            .map(|id| {
                let path = Self::checkpoint_path(dir, id);
                let f =
                    std::fs::File::open(&path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
                QNetwork::load(std::io::BufReader::new(f), Some(arch))
                    .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        if Self::checkpoint_path(dir, n_agents).exists() {
            return Err(Error::Checkpoint(format!("{} holds more than {n_agents} agent networks", dir.display())));
        }
        Ok(Self { networks, observation })
    }
}

impl Controller for TrainedPolicy {
    fn name(&self) -> String {
        "trained".into()
    }

    fn decide(&mut self, id: usize, percept: &Percept, _world: &WorldState, env: &EnvConfig) -> Result<usize> {
        let net = self.networks.get(id).ok_or(Error::UnknownSensor(id))?;
        let q = net.forward(&encode_observation(percept, env, &self.observation))?;
        Ok(argmax(&q))
    }
}

/// First episode `e >= window` where consecutive sliding-window means of the
/// episodic reward differ by less than `threshold` relative to the earlier one.
pub fn detect_convergence(rewards: &[f64], window: usize, threshold: f64) -> Option<usize> {
    assert!(window >= 2, "convergence window must be at least 2");
    if rewards.len() <= window {
        return None;
    }
    let mean = |end: usize| rewards[end + 1 - window..=end].iter().sum::<f64>() / window as f64;
    (window..rewards.len()).find(|&e| {
        let (prev, cur) = (mean(e - 1), mean(e));
        let change = (cur - prev).abs();
        if prev == 0.0 {
            change == 0.0
        } else {
            change / prev.abs() < threshold
        }
    })
}

pub const SWEEP_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha_mult: f64,
    pub beta_mult: f64,
    pub gamma_mult: f64,
    pub seed: u64,
    pub final_coverage: f64,
    pub total_energy: f64,
    pub lifetime: usize,
    pub lifetime_censored: bool,
}

/// Trains every combination of `{0.5, 1, 2}` multipliers on the three
/// positive reward coefficients, once per seed. Final coverage is the mean
/// over the last `min(10, E)` episodes.
pub fn sensitivity_sweep(
    env: &EnvConfig,
    train: &TrainConfig,
    reward: &RewardConfig,
    seeds: &[u64],
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for &am in &SWEEP_MULTIPLIERS {
        for &bm in &SWEEP_MULTIPLIERS {
            for &gm in &SWEEP_MULTIPLIERS {
                let r = RewardConfig {
                    alpha: reward.alpha * am,
                    beta_cov: reward.beta_cov * bm,
                    reward_gamma: reward.reward_gamma * gm,
                    ..reward.clone()
                };
                for &seed in seeds {
                    let run = run_training(env, &TrainConfig { seed, ..train.clone() }, &r)?;
                    let tail = &run.logs[run.logs.len().saturating_sub(10)..];
                    let life = network_lifetime(&run.logs, env.n_sensors);
                    cells.push(SweepCell {
                        alpha_mult: am,
                        beta_mult: bm,
                        gamma_mult: gm,
                        seed,
                        final_coverage: tail.iter().map(|l| l.coverage).sum::<f64>() / tail.len().max(1) as f64,
                        total_energy: run.logs.iter().map(|l| l.energy).sum(),
                        lifetime: life.episodes,
                        lifetime_censored: life.censored,
                    });
                }
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Field;

    fn tiny_env(n: usize) -> EnvConfig {
        EnvConfig { field: Field::new(100.0, 100.0, 1.0).unwrap(), n_sensors: n, ..EnvConfig::default() }
    }

    #[test]
    fn one_episode_one_step_counts() {
        let train = TrainConfig { episodes: 1, ..TrainConfig::default() };
        let mut t = Trainer::new(tiny_env(2), train, RewardConfig::default(), VisionConfig::default()).unwrap();
        t.run().unwrap();
        assert_eq!(t.transitions_stored, 2);
        assert_eq!(t.decays_applied, 1);
        assert_eq!(t.logs.len(), 1);
    }

    #[test]
    fn epsilon_reaches_floor_after_200_decays() {
        let cfg = TrainConfig::default();
        let raw = cfg.epsilon_start * cfg.epsilon_decay.powi(200);
        assert!((raw - 0.1).abs() < 5e-4, "{raw}");
        assert_eq!(cfg.epsilon_after(400), 0.1);
    }

    #[test]
    fn convergence_fixtures() {
        assert_eq!(detect_convergence(&[1.0; 50], 20, 0.01), Some(20));
        let growing: Vec<f64> = (0..100).map(|i| 1.05f64.powi(i)).collect();
        assert_eq!(detect_convergence(&growing, 20, 0.01), None);
        assert_eq!(detect_convergence(&[1.0; 10], 20, 0.01), None);
    }

    #[test]
    fn training_is_reproducible() {
        let env = EnvConfig { steps_per_episode: 5, ..tiny_env(3) };
        let train = TrainConfig {
            episodes: 4,
            seed: 9,
            learner: LearnerConfig { batch: 8, ..LearnerConfig::default() },
            ..TrainConfig::default()
        };
        let a = run_training(&env, &train, &RewardConfig::default()).unwrap();
        let b = run_training(&env, &train, &RewardConfig::default()).unwrap();
        let json = |logs: &[EpisodeLog]| logs.iter().map(|l| serde_json::to_string(l).unwrap()).collect::<Vec<_>>();
        assert_eq!(json(&a.logs), json(&b.logs));
        assert!(a.logs.last().unwrap().learner_steps > 0);
    }
}
