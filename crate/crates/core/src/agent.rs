//! Independent learner: observation encoding, epsilon-greedy choice and
//! prioritized Double-DQN updates for one sensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::nn::{argmax, td_targets, Adam, AdamConfig, Architecture, QNetwork, TargetMode, OBS_DIM};
use crate::replay::{Observation, PrioritizedReplay, ReplayConfig, Transition};
use crate::seed;

/// What one agent perceives of the world at a decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percept {
    pub position: Point,
    pub battery: f64,
    pub target: Point,
    pub n_active: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    /// Meters mapped to 1.0 in the target-displacement components; `None`
    /// uses the field extent. Values are clipped to [-1, 1].
    pub displacement_scale: Option<f64>,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self { displacement_scale: Some(10.0) }
    }
}

/// `[x/W, y/H, b/B0, N_active/N, coverage, dx*, dy*]`.
pub fn encode_observation(p: &Percept, env: &EnvConfig, cfg: &ObservationConfig) -> Observation {
    let (w, h) = (env.field.width, env.field.height);
    let (sx, sy) = match cfg.displacement_scale {
        Some(s) => (s, s),
        None => (w, h),
    };
    let obs: [f64; OBS_DIM] = [
        p.position.x / w,
        p.position.y / h,
        p.battery / env.initial_battery,
        p.n_active as f64 / env.n_sensors.max(1) as f64,
        p.coverage,
        (p.target.x - p.position.x) / sx,
        (p.target.y - p.position.y) / sy,
    ];
    obs.map(|v| v.clamp(-1.0, 1.0))
}

/// Epsilon-greedy over `q`; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub discount: f64,
    pub batch: usize,
    pub target_sync: u64,
    pub target_mode: TargetMode,
    pub adam: AdamConfig,
    pub replay: ReplayConfig,
    pub trunk: Vec<usize>,
    pub head_hidden: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let arch = Architecture::default();
        Self {
            discount: 0.99,
            batch: 64,
            target_sync: 1000,
            target_mode: TargetMode::Double,
            adam: AdamConfig::default(),
            replay: ReplayConfig::default(),
            trunk: arch.trunk,
            head_hidden: arch.head_hidden,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::InvalidConfig(format!("discount must lie in [0, 1], got {}", self.discount)));
        }
        if self.batch == 0 || self.target_sync == 0 {
            return Err(Error::InvalidConfig("batch and target_sync must be positive".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.trunk.is_empty() || self.trunk.contains(&0) || self.head_hidden == 0 {
            return Err(Error::InvalidConfig("network layer widths must be positive".into()));
        }
        self.replay.validate()
    }

    pub fn architecture(&self, n_actions: usize) -> Architecture {
        Architecture { obs_dim: OBS_DIM, trunk: self.trunk.clone(), head_hidden: self.head_hidden, n_actions }
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: Adam,
    pub buffer: PrioritizedReplay<Transition>,
    pub rng: ChaCha8Rng,
    pub learner_steps: u64,
    pub target_syncs: u64,
}

impl Agent {
    pub fn new(id: usize, n_actions: usize, cfg: &LearnerConfig, run_seed: u64) -> Self {
        let online = QNetwork::new(cfg.architecture(n_actions), seed::stream(run_seed, "agent-init", id as u64));
        let target = online.clone();
        let optimizer = Adam::new(online.params().len(), cfg.adam);
        Self {
            id,
            online,
            target,
            optimizer,
            buffer: PrioritizedReplay::new(cfg.replay.capacity, cfg.replay.alpha),
            rng: ChaCha8Rng::seed_from_u64(seed::stream(run_seed, "agent", id as u64)),
            learner_steps: 0,
            target_syncs: 0,
        }
    }

    pub fn act(&mut self, obs: &Observation, epsilon: f64) -> Result<usize> {
        let q = self.online.forward(obs)?;
        Ok(select_action(&q, epsilon, &mut self.rng))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push_new(t);
    }

    /// One prioritized mini-batch update; returns the mean absolute TD error.
    pub fn learn(&mut self, cfg: &LearnerConfig, beta: f64) -> Result<f64> {
        let batch = self.buffer.sample(cfg.batch, beta, &mut self.rng)?;
        let n = batch.items.len();
        let mut obs = Vec::with_capacity(n * OBS_DIM);
        let mut next = Vec::with_capacity(n * OBS_DIM);
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut terminal = Vec::with_capacity(n);
        for t in &batch.items {
            obs.extend_from_slice(&t.obs);
            next.extend_from_slice(&t.next_obs);
            actions.push(t.action);
            rewards.push(t.reward);
            terminal.push(t.terminal);
        }
        let targets = td_targets(&self.online, &self.target, &rewards, &next, &terminal, cfg.discount, cfg.target_mode);
        let (grad, td) = self.online.batch_gradient(&obs, &actions, &targets, &batch.weights);
        self.optimizer.step(self.online.params_mut(), &grad).map_err(|_| Error::Diverged(self.learner_steps + 1))?;
        self.learner_steps += 1;
        if !self.online.is_finite() {
            return Err(Error::Diverged(self.learner_steps));
        }
        self.buffer.update_priorities(&batch.indices, &td, cfg.replay.epsilon);
        if self.learner_steps.is_multiple_of(cfg.target_sync) {
            self.target.copy_from(&self.online);
            self.target_syncs += 1;
        }
        Ok(td.iter().map(|e| e.abs()).sum::<f64>() / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_ties_pick_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[0.0; 9], 0.0, &mut rng), 0);
        assert_eq!(select_action(&[0.0, 2.0, 1.0], 0.0, &mut rng), 1);
    }

    #[test]
    fn observation_components_are_bounded() {
        let env = EnvConfig::default();
        let p = Percept {
            position: Point::new(0.0, 500.0),
            battery: 100.0,
            target: Point::new(500.0, 0.0),
            n_active: 100,
            coverage: 1.0,
        };
        for cfg in [ObservationConfig::default(), ObservationConfig { displacement_scale: None }] {
            let o = encode_observation(&p, &env, &cfg);
            assert!(o.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(o[5], 1.0);
            assert_eq!(o[6], -1.0);
        }
    }

    #[test]
    fn terminal_toy_converges_to_reward() {
        let cfg = LearnerConfig { batch: 1, ..LearnerConfig::default() };
        let mut agent = Agent::new(0, 9, &cfg, 5);
        let obs = [0.2, 0.4, 1.0, 1.0, 0.3, 0.1, -0.1];
        agent.remember(Transition { obs, action: 4, reward: 2.0, next_obs: obs, terminal: true });
        let mut steps = 0;
        while steps < 5000 {
            agent.learn(&cfg, 1.0).unwrap();
            steps += 1;
            if (agent.online.forward(&obs).unwrap()[4] - 2.0).abs() < 1e-3 {
                break;
            }
        }
        assert!(steps < 5000, "did not converge");
    }
}
