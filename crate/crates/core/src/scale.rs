//! Scaling runs: coverage and wall-clock cost as the number of sensors grows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::Field;
use crate::reward::RewardConfig;
use crate::rollout::Controller;
use crate::trainer::{TrainConfig, Trainer};
use crate::vision::VisionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleConfig {
    pub sensor_counts: Vec<usize>,
    /// Grow the field with `n` so sensor density matches the base scenario.
    pub keep_density: bool,
    /// Timed passes over all agents' greedy decisions.
    pub decision_repeats: usize,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self { sensor_counts: vec![100, 200, 300], keep_density: false, decision_repeats: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n_sensors: usize,
    pub field_width: f64,
    pub field_height: f64,
    pub episodes: usize,
    /// Mean over the last `min(10, E)` training episodes.
    pub final_coverage: f64,
    /// Mean wall-clock per training step (act, move, reward, learn) in ms.
    pub step_ms: f64,
    /// Mean greedy decision time per agent in microseconds.
    pub decision_us_per_agent: f64,
}

/// `base` with `n` sensors; with `keep_density` the field is scaled by `sqrt(n / base.n)`.
pub fn scaled_env(base: &EnvConfig, n: usize, keep_density: bool) -> Result<EnvConfig> {
    let mut env = EnvConfig { n_sensors: n, ..base.clone() };
    if keep_density {
        let k = (n as f64 / base.n_sensors.max(1) as f64).sqrt();
        env.field = Field::new(base.field.width * k, base.field.height * k, base.field.cell_size)?;
    }
    env.validate()?;
    Ok(env)
}

pub fn scale_run(
    base: &EnvConfig,
    train: &TrainConfig,
    reward: &RewardConfig,
    cfg: &ScaleConfig,
) -> Result<Vec<ScaleRow>> {
    if cfg.sensor_counts.is_empty() {
        return Err(Error::InvalidConfig("scale run needs at least one sensor count".into()));
    }
    let mut rows = Vec::with_capacity(cfg.sensor_counts.len());
    for &n in &cfg.sensor_counts {
        let env = scaled_env(base, n, cfg.keep_density)?;
        let mut t = Trainer::new(env.clone(), train.clone(), reward.clone(), VisionConfig::default())?;
        let (mut secs, mut steps) = (0.0, 0usize);
        let episodes = t.train.episodes;
        while t.episode < episodes {
            let log = t.run_episode()?;
            // The first episodes fill the replay buffers before any learning happens.
            if log.episode >= 2 || episodes <= 2 {
                secs += log.wall_clock_s;
                steps += log.steps;
            }
        }
        let tail = &t.logs[t.logs.len().saturating_sub(10)..];
        rows.push(ScaleRow {
            n_sensors: n,
            field_width: env.field.width,
            field_height: env.field.height,
            episodes: t.train.episodes,
            final_coverage: tail.iter().map(|l| l.coverage).sum::<f64>() / tail.len().max(1) as f64,
            step_ms: 1e3 * secs / steps.max(1) as f64,
            decision_us_per_agent: decision_latency(&t, cfg.decision_repeats)? * 1e6,
        });
    }
    Ok(rows)
}

/// Seconds per greedy decision, averaged over all agents of a fresh deployment.
fn decision_latency(t: &Trainer, repeats: usize) -> Result<f64> {
    let mut policy = t.policy();
    let world = crate::rollout::deploy(&t.env, crate::rollout::Deployment::Random, t.train.seed, usize::MAX)?;
    let percepts = crate::rollout::Perception::GroundTruth.perceive(&world, &t.env)?;
    let mut sink = 0usize;
    let started = Instant::now();
    for _ in 0..repeats.max(1) {
        for (id, p) in percepts.iter().enumerate() {
            sink = sink.wrapping_add(policy.decide(id, p, &world, &t.env)?);
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    Ok(elapsed / (repeats.max(1) * percepts.len().max(1)) as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 20.0, 40.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.2)).collect();
        assert!((loglog_slope(&x, &y) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn density_scaling_grows_the_field() {
        let base = EnvConfig { field: Field::new(250.0, 250.0, 1.0).unwrap(), n_sensors: 25, ..EnvConfig::default() };
        let e = scaled_env(&base, 100, true).unwrap();
        assert!((e.field.width - 500.0).abs() < 1e-9);
        assert_eq!(scaled_env(&base, 100, false).unwrap().field.width, 250.0);
    }
}
