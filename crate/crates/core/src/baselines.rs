//! Non-learning deployment strategies used as comparison points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::Percept;
use crate::env::{EnvConfig, WorldState};
use crate::error::Result;
use crate::reward::RewardConfig;
use crate::rollout::{moved, simulate, stay_index, Controller, Deployment, EpisodeLog, Perception, SimConfig};
use crate::seed;

/// Uniformly random action every step.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    rng: ChaCha8Rng,
}

impl RandomWalk {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed::stream(seed, "random-walk", 0)) }
    }
}

impl Controller for RandomWalk {
    fn name(&self) -> String {
        "random".into()
    }

    fn decide(&mut self, _id: usize, _p: &Percept, _w: &WorldState, env: &EnvConfig) -> Result<usize> {
        Ok(self.rng.gen_range(0..env.n_actions()))
    }
}

/// Never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stationary;

impl Controller for Stationary {
    fn name(&self) -> String {
        "static_grid".into()
    }

    fn decide(&mut self, _id: usize, _p: &Percept, _w: &WorldState, env: &EnvConfig) -> Result<usize> {
        Ok(stay_index(env))
    }
}

/// Rule-based mobility: take the move with the largest coverage gain,
/// breaking ties by progress toward the nearest uncovered cell; stay when
/// no move adds coverage.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyCoverage;

impl Controller for GreedyCoverage {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn decide(&mut self, id: usize, _p: &Percept, world: &WorldState, env: &EnvConfig) -> Result<usize> {
        let stay = stay_index(env);
        let here = world.sensors[id].position;
        let r = env.sensing_radius;
        let Some(goal) = world.coverage.nearest_uncovered(here) else {
            return Ok(stay);
        };
        let now = world.coverage_fraction();
        let mut best = (stay, 0.0, here.distance(&goal));
        for (i, a) in env.actions().iter().enumerate() {
            let to = moved(here, *a, env);
            if to == here {
                continue;
            }
            let gain = world.coverage.coverage_if_moved(here, to, r) - now;
            let dist = to.distance(&goal);
            if gain > best.1 || (gain == best.1 && gain > 0.0 && dist < best.2) {
                best = (i, gain, dist);
            }
        }
        Ok(if best.1 > 0.0 { best.0 } else { stay })
    }
}

pub fn baseline_random(env: &EnvConfig, reward: &RewardConfig, sim: &SimConfig) -> Result<Vec<EpisodeLog>> {
    let sim = SimConfig { deployment: Deployment::Random, ..*sim };
    simulate(env, reward, &mut RandomWalk::new(sim.seed), &sim, Perception::GroundTruth)
}

pub fn baseline_static_grid(env: &EnvConfig, reward: &RewardConfig, sim: &SimConfig) -> Result<Vec<EpisodeLog>> {
    let sim = SimConfig { deployment: Deployment::Grid, ..*sim };
    simulate(env, reward, &mut Stationary, &sim, Perception::GroundTruth)
}

pub fn baseline_greedy(env: &EnvConfig, reward: &RewardConfig, sim: &SimConfig) -> Result<Vec<EpisodeLog>> {
    let sim = SimConfig { deployment: Deployment::Random, ..*sim };
    simulate(env, reward, &mut GreedyCoverage, &sim, Perception::GroundTruth)
}
