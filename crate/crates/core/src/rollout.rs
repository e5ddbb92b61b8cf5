//! Stepping a world under a decision rule, with perception and reward bookkeeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::Percept;
use crate::env::{self, EnvConfig, WorldState};
use crate::error::Result;
use crate::geometry::{build_coverage_map, coverage_fraction, redundancy_rate, square_grid_positions, Point};
use crate::reward::{compute_reward, reward_inputs, RewardBranch, RewardConfig};
use crate::seed;
use crate::vision::{observe_world, CameraModel, VisionConfig, VisionTracker};

/// How agents learn where they are.
#[derive(Debug, Clone)]
pub enum Perception {
    GroundTruth,
    Vision(Box<VisionPerception>),
}

#[derive(Debug, Clone)]
pub struct VisionPerception {
    pub camera: CameraModel,
    pub cfg: VisionConfig,
    pub tracker: VisionTracker,
    seed: u64,
    frames_seen: u64,
    pub last_detected: usize,
}

impl Perception {
    pub fn vision(env: &EnvConfig, cfg: VisionConfig, world: &WorldState, seed: u64) -> Result<Self> {
        let camera = CameraModel::overhead(&env.field, &cfg)?;
        // Association gate: a little more than one diagonal move.
        let gate = 1.5 * env.step_size * std::f64::consts::SQRT_2;
        Ok(Perception::Vision(Box::new(VisionPerception {
            camera,
            cfg,
            tracker: VisionTracker::new(world.positions(), gate),
            seed,
            frames_seen: 0,
            last_detected: 0,
        })))
    }

    /// Re-seeds position estimates from known drop positions.
    pub fn redeploy(&mut self, world: &WorldState) {
        if let Perception::Vision(v) = self {
            let gate = v.tracker.gate();
            v.tracker = VisionTracker::new(world.positions(), gate);
        }
    }

    pub fn perceive(&mut self, world: &WorldState, env: &EnvConfig) -> Result<Vec<Percept>> {
        match self {
            Perception::GroundTruth => {
                let coverage = world.coverage_fraction();
                Ok(world
                    .sensors
                    .iter()
                    .map(|s| Percept {
                        position: s.position,
                        battery: s.battery,
                        target: s.target,
                        n_active: world.n_active,
                        coverage,
                    })
                    .collect())
            }
            Perception::Vision(v) => {
                let obs = observe_world(world, &v.camera, &v.cfg, seed::derive_seed(v.seed, v.frames_seen))?;
                v.frames_seen += 1;
                v.last_detected = obs.detections.len();
                let active: Vec<usize> = world.sensors.iter().filter(|s| s.active).map(|s| s.id).collect();
                v.tracker.correct(&active, &obs.positions());
                let est = v.tracker.estimates();
                let flags = world.active_flags();
                let coverage = coverage_fraction(&build_coverage_map(est, &flags, env.sensing_radius, &env.field)?);
                Ok(world
                    .sensors
                    .iter()
                    .map(|s| Percept {
                        position: est[s.id],
                        battery: s.battery,
                        target: s.target,
                        n_active: obs.detections.len(),
                        coverage,
                    })
                    .collect())
            }
        }
    }

    fn commanded(&mut self, id: usize, action: env::Action, env: &EnvConfig) {
        if let Perception::Vision(v) = self {
            v.tracker.predict(id, (action.dx, action.dy), &env.field);
        }
    }
}

/// Where sensors start an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    #[default]
    Random,
    Grid,
}

pub fn deploy(env: &EnvConfig, mode: Deployment, run_seed: u64, episode: usize) -> Result<WorldState> {
    let mut world = match mode {
        Deployment::Random => env::reset(env, seed::stream(run_seed, "deploy", episode as u64))?,
        Deployment::Grid => env::deploy_at(env, &square_grid_positions(env.n_sensors, &env.field))?,
    };
    world.episode = episode;
    Ok(world)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub id: usize,
    pub action: usize,
    pub before: Percept,
    pub after: Percept,
    pub reward: f64,
    pub branch: RewardBranch,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub agents: Vec<AgentStep>,
    pub energy: f64,
}

/// A world plus the perception that feeds its agents.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub world: WorldState,
    pub perception: Perception,
    pub percepts: Vec<Percept>,
}

impl Rollout {
    pub fn new(world: WorldState, mut perception: Perception, env: &EnvConfig) -> Result<Self> {
        let percepts = perception.perceive(&world, env)?;
        Ok(Self { world, perception, percepts })
    }

    pub fn redeploy(&mut self, world: WorldState, env: &EnvConfig) -> Result<()> {
        self.perception.redeploy(&world);
        self.percepts = self.perception.perceive(&world, env)?;
        self.world = world;
        Ok(())
    }

    pub fn inject_failure(&mut self, id: usize, env: &EnvConfig) -> Result<()> {
        self.world = env::inject_failure(&self.world, id, env)?;
        for (p, s) in self.percepts.iter_mut().zip(&self.world.sensors) {
            p.target = s.target;
        }
        Ok(())
    }

    /// One synchronous step: `choose(id, percept, world)` picks an action
    /// index for each active sensor in id order.
    pub fn step_with(
        &mut self,
        env: &EnvConfig,
        reward: &RewardConfig,
        mut choose: impl FnMut(usize, &Percept, &WorldState) -> Result<usize>,
    ) -> Result<StepRecord> {
        let actions = env.actions();
        let mut chosen = BTreeMap::new();
        let mut commands = BTreeMap::new();
        for s in self.world.sensors.iter().filter(|s| s.active) {
            let a = choose(s.id, &self.percepts[s.id], &self.world)?;
            let action =
                *actions.get(a).ok_or(crate::Error::ActionOutOfRange { index: a, n_actions: actions.len() })?;
            chosen.insert(s.id, a);
            commands.insert(s.id, action);
        }
        let next = env::step(&self.world, &commands, env)?;
        for (&id, &action) in &commands {
            self.perception.commanded(id, action, env);
        }
        let next_percepts = self.perception.perceive(&next, env)?;
        let mut agents = Vec::with_capacity(chosen.len());
        for (&id, &a) in &chosen {
            let inputs = reward_inputs(&self.world, &next, id, env, reward);
            let r = compute_reward(&inputs, reward);
            agents.push(AgentStep {
                id,
                action: a,
                before: self.percepts[id],
                after: next_percepts[id],
                reward: r.value,
                branch: r.branch,
                terminal: !next.sensors[id].active,
            });
        }
        let energy = self.world.total_battery() - next.total_battery();
        self.world = next;
        self.percepts = next_percepts;
        Ok(StepRecord { agents, energy })
    }
}

/// Per-episode summary shared by training and evaluation runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub coverage: f64,
    pub mean_reward: f64,
    pub total_reward: f64,
    pub n_active: usize,
    pub energy: f64,
    pub redundancy: f64,
    pub epsilon: f64,
    pub learner_steps: u64,
    pub mean_td_error: f64,
    pub agent_rewards: Vec<f64>,
    /// Kept out of the serialized log so that logs are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// Accumulates step records into an [`EpisodeLog`].
#[derive(Debug, Clone)]
pub struct EpisodeTally {
    pub agent_rewards: Vec<f64>,
    pub decisions: usize,
    pub steps: usize,
    pub energy: f64,
    pub td_sum: f64,
    pub td_count: usize,
}

impl EpisodeTally {
    pub fn new(n: usize) -> Self {
        Self { agent_rewards: vec![0.0; n], decisions: 0, steps: 0, energy: 0.0, td_sum: 0.0, td_count: 0 }
    }

    pub fn add(&mut self, rec: &StepRecord) {
        for a in &rec.agents {
            self.agent_rewards[a.id] += a.reward;
        }
        self.decisions += rec.agents.len();
        self.steps += 1;
        self.energy += rec.energy;
    }

    pub fn finish(self, episode: usize, world: &WorldState, epsilon: f64, learner_steps: u64) -> EpisodeLog {
        let total: f64 = self.agent_rewards.iter().sum();
        EpisodeLog {
            episode,
            steps: self.steps,
            coverage: world.coverage_fraction(),
            mean_reward: if self.decisions == 0 { 0.0 } else { total / self.decisions as f64 },
            total_reward: total,
            n_active: world.n_active,
            energy: self.energy,
            redundancy: redundancy_rate(&world.coverage),
            epsilon,
            learner_steps,
            mean_td_error: if self.td_count == 0 { 0.0 } else { self.td_sum / self.td_count as f64 },
            agent_rewards: self.agent_rewards,
            wall_clock_s: 0.0,
        }
    }
}

/// A fixed (non-learning) decision rule.
pub trait Controller {
    fn name(&self) -> String;

    fn begin_episode(&mut self, _world: &WorldState, _episode: usize) {}

    fn decide(&mut self, id: usize, percept: &Percept, world: &WorldState, env: &EnvConfig) -> Result<usize>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub episodes: usize,
    pub redeploy_each_episode: bool,
    pub deployment: Deployment,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { episodes: 10, redeploy_each_episode: true, deployment: Deployment::Random, seed: 0 }
    }
}

/// Runs `controller` for `sim.episodes` episodes of `env.steps_per_episode` steps.
pub fn simulate(
    env: &EnvConfig,
    reward: &RewardConfig,
    controller: &mut dyn Controller,
    sim: &SimConfig,
    perception: Perception,
) -> Result<Vec<EpisodeLog>> {
    let world = deploy(env, sim.deployment, sim.seed, 0)?;
    let mut rollout = Rollout::new(world, perception, env)?;
    let mut logs = Vec::with_capacity(sim.episodes);
    for e in 0..sim.episodes {
        if e > 0 && sim.redeploy_each_episode {
            rollout.redeploy(deploy(env, sim.deployment, sim.seed, e)?, env)?;
        }
        rollout.world.episode = e;
        controller.begin_episode(&rollout.world, e);
        let mut tally = EpisodeTally::new(env.n_sensors);
        for _ in 0..env.steps_per_episode {
            if rollout.world.n_active == 0 {
                break;
            }
            let rec = rollout.step_with(env, reward, |id, p, w| controller.decide(id, p, w, env))?;
            tally.add(&rec);
        }
        logs.push(tally.finish(e, &rollout.world, 0.0, 0));
    }
    Ok(logs)
}

/// Index of the stay action in the configured action set.
pub fn stay_index(env: &EnvConfig) -> usize {
    env.actions().iter().position(|a| a.dx == 0.0 && a.dy == 0.0).expect("action sets include stay")
}

/// Position after taking `action` from `p` (clamped, ignoring battery).
pub fn moved(p: Point, action: env::Action, env: &EnvConfig) -> Point {
    env.field.clamp(Point::new(p.x + action.dx, p.y + action.dy))
}
