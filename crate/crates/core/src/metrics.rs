//! Evaluation metrics and the method comparison table.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{GreedyCoverage, RandomWalk, Stationary};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::reward::RewardConfig;
use crate::rollout::{deploy, simulate, Controller, Deployment, EpisodeLog, Perception, Rollout, SimConfig};
use crate::seed;
use crate::trainer::{run_training, TrainConfig};

/// Seconds of simulated time per environment step (one camera interval).
pub const STEP_SECONDS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifetime {
    pub episodes: usize,
    /// True when the threshold was never crossed.
    pub censored: bool,
}

/// First episode whose end-of-episode active count falls below 20% of the
/// network; the episode count when that never happens.
pub fn network_lifetime(logs: &[EpisodeLog], n_sensors: usize) -> Lifetime {
    let limit = 0.2 * n_sensors as f64;
    match logs.iter().find(|l| (l.n_active as f64) < limit) {
        Some(l) => Lifetime { episodes: l.episode, censored: false },
        None => Lifetime { episodes: logs.len(), censored: true },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    /// Population variance of the episodic mean reward over each full window,
    /// indexed by the window's last episode minus `window - 1`.
    pub variances: Vec<f64>,
    pub summary: f64,
}

pub fn learning_stability(rewards: &[f64], window: usize) -> Stability {
    assert!(window >= 1);
    let variances: Vec<f64> = rewards
        .windows(window)
        .map(|w| {
            let m = w.iter().sum::<f64>() / window as f64;
            w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / window as f64
        })
        .collect();
    let summary = variances.last().copied().unwrap_or(f64::NAN);
    Stability { variances, summary }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryConfig {
    pub trials: usize,
    /// Steps run before the failure so the deployment settles.
    pub warmup_steps: usize,
    /// Steps allowed for recovery before the trial is censored.
    pub budget_steps: usize,
    /// Recovery means coverage back to this fraction of its pre-failure value.
    pub threshold: f64,
    /// Sensors failed at once.
    pub failures: usize,
    /// Fail a random sensor plus its nearest active neighbours, rather than
    /// independent random sensors.
    pub clustered: bool,
    pub deployment: Deployment,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            warmup_steps: 40,
            budget_steps: 60,
            threshold: 0.95,
            failures: 1,
            clustered: false,
            deployment: Deployment::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    /// Seconds per trial; `None` when censored.
    pub times: Vec<Option<f64>>,
    pub pre_coverage: Vec<f64>,
    pub drop_coverage: Vec<f64>,
}

impl RecoveryReport {
    pub fn censored_fraction(&self) -> f64 {
        self.times.iter().filter(|t| t.is_none()).count() as f64 / self.times.len().max(1) as f64
    }

    /// Median with censored trials ordered after every finite time.
    pub fn median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        m.is_finite().then_some(m)
    }

    pub fn median_or_inf(&self) -> f64 {
        self.median().unwrap_or(f64::INFINITY)
    }

    /// Mean over finite trials.
    pub fn mean_finite(&self) -> Option<f64> {
        let f: Vec<f64> = self.times.iter().flatten().copied().collect();
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }
}

/// Failure-recovery protocol: settle, fail sensors, count steps until coverage
/// returns to `threshold` of its pre-failure value.
pub fn recovery_time(
    controller: &mut dyn Controller,
    env: &EnvConfig,
    reward: &RewardConfig,
    cfg: &RecoveryConfig,
    run_seed: u64,
) -> Result<RecoveryReport> {
    let mut report = RecoveryReport { times: Vec::new(), pre_coverage: Vec::new(), drop_coverage: Vec::new() };
    for trial in 0..cfg.trials {
        let world = deploy(env, cfg.deployment, seed::stream(run_seed, "recovery", trial as u64), trial)?;
        controller.begin_episode(&world, trial);
        let mut rollout = Rollout::new(world, Perception::GroundTruth, env)?;
        for _ in 0..cfg.warmup_steps {
            if rollout.world.n_active == 0 {
                break;
            }
            rollout.step_with(env, reward, |id, p, w| controller.decide(id, p, w, env))?;
        }
        let pre = rollout.world.coverage_fraction();
        let mut rng = ChaCha8Rng::seed_from_u64(seed::stream(run_seed, "failure-pick", trial as u64));
        for id in pick_failures(&rollout, cfg, &mut rng) {
            rollout.inject_failure(id, env)?;
        }
        let goal = cfg.threshold * pre;
        let mut time = None;
        report.drop_coverage.push(rollout.world.coverage_fraction());
        for steps in 0..=cfg.budget_steps {
            if rollout.world.coverage_fraction() >= goal {
                time = Some(steps as f64 * STEP_SECONDS);
                break;
            }
            if steps == cfg.budget_steps || rollout.world.n_active == 0 {
                break;
            }
            rollout.step_with(env, reward, |id, p, w| controller.decide(id, p, w, env))?;
        }
        report.pre_coverage.push(pre);
        report.times.push(time);
    }
    Ok(report)
}

fn pick_failures(rollout: &Rollout, cfg: &RecoveryConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let active: Vec<usize> = rollout.world.sensors.iter().filter(|s| s.active).map(|s| s.id).collect();
    let k = cfg.failures.min(active.len());
    if k == 0 {
        return Vec::new();
    }
    if !cfg.clustered {
        return active.choose_multiple(rng, k).copied().collect();
    }
    let seed_id = *active.choose(rng).expect("non-empty");
    let origin = rollout.world.sensors[seed_id].position;
    let mut by_dist = active.clone();
    by_dist.sort_by(|a, b| {
        let da = rollout.world.sensors[*a].position.distance(&origin);
        let db = rollout.world.sensors[*b].position.distance(&origin);
        da.total_cmp(&db).then(a.cmp(b))
    });
    by_dist.truncate(k);
    by_dist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trained,
    Random,
    StaticGrid,
    Greedy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Trained, Method::Random, Method::StaticGrid, Method::Greedy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Trained => "trained",
            Method::Random => "random",
            Method::StaticGrid => "static_grid",
            Method::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| Error::UnknownMethod {
            name: s.to_string(),
            valid: Method::ALL.map(|m| m.as_str()).join(", "),
        })
    }
}

/// Per-run evaluation summary. Energies are in battery units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    pub final_coverage_pct: f64,
    pub total_energy: f64,
    pub mean_energy: f64,
    pub redundancy_pct: f64,
    pub lifetime_episodes: f64,
    pub lifetime_censored: bool,
    /// Population variance of the mean reward over the final window.
    pub stability: f64,
    pub recovery_time_s: f64,
    pub localization_error_m: f64,
    pub convergence_episode: f64,
}

impl MetricsReport {
    /// Builds a report from evaluation logs; final values average the last
    /// `min(10, E)` episodes.
    pub fn from_logs(method: &str, seed: u64, logs: &[EpisodeLog], n_sensors: usize, window: usize) -> Self {
        let tail = &logs[logs.len().saturating_sub(10)..];
        let n = tail.len().max(1) as f64;
        let total_energy: f64 = logs.iter().map(|l| l.energy).sum();
        let life = network_lifetime(logs, n_sensors);
        let rewards: Vec<f64> = logs.iter().map(|l| l.mean_reward).collect();
        Self {
            method: method.to_string(),
            seed,
            final_coverage_pct: 100.0 * tail.iter().map(|l| l.coverage).sum::<f64>() / n,
            total_energy,
            mean_energy: total_energy / logs.len().max(1) as f64,
            redundancy_pct: 100.0 * tail.iter().map(|l| l.redundancy).sum::<f64>() / n,
            lifetime_episodes: life.episodes as f64,
            lifetime_censored: life.censored,
            stability: learning_stability(&rewards, window.min(rewards.len()).max(1)).summary,
            recovery_time_s: f64::NAN,
            localization_error_m: f64::NAN,
            convergence_episode: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub recovery: Option<RecoveryConfig>,
    pub stability_window: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { sim: SimConfig::default(), train: TrainConfig::default(), recovery: None, stability_window: 20 }
    }
}

/// Evaluates every method at every seed. Trained rows train a fresh policy
/// per seed and then run it greedily under the same protocol as the baselines.
pub fn compare_methods(
    env: &EnvConfig,
    reward: &RewardConfig,
    methods: &[Method],
    seeds: &[u64],
    cfg: &CompareConfig,
) -> Result<Vec<MetricsReport>> {
    if methods.len() < 2 {
        return Err(Error::InvalidConfig("comparison needs at least two methods".into()));
    }
    let mut out = Vec::new();
    for &method in methods {
        for &seed in seeds {
            let sim = SimConfig { seed, ..cfg.sim };
            let mut convergence = f64::NAN;
            let mut controller: Box<dyn Controller> = match method {
                Method::Trained => {
                    let run = run_training(env, &TrainConfig { seed, ..cfg.train.clone() }, reward)?;
                    convergence = run.convergence.map_or(f64::NAN, |e| e as f64);
                    Box::new(run.policy)
                }
                Method::Random => Box::new(RandomWalk::new(seed)),
                Method::StaticGrid => Box::new(Stationary),
                Method::Greedy => Box::new(GreedyCoverage),
            };
            let deployment = if method == Method::StaticGrid { Deployment::Grid } else { sim.deployment };
            let sim = SimConfig { deployment, ..sim };
            let logs = simulate(env, reward, controller.as_mut(), &sim, Perception::GroundTruth)?;
            let mut report =
                MetricsReport::from_logs(method.as_str(), seed, &logs, env.n_sensors, cfg.stability_window);
            report.convergence_episode = convergence;
            if let Some(rc) = &cfg.recovery {
                let rc = RecoveryConfig { deployment, ..rc.clone() };
                report.recovery_time_s = recovery_time(controller.as_mut(), env, reward, &rc, seed)?.median_or_inf();
            }
            out.push(report);
        }
    }
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Column order of the comparison table, after `method,runs`.
pub const COMPARISON_FIELDS: [&str; 9] = [
    "final_coverage_pct",
    "total_energy",
    "mean_energy",
    "redundancy_pct",
    "lifetime_episodes",
    "stability",
    "recovery_time_s",
    "localization_error_m",
    "convergence_episode",
];

fn field_values(r: &MetricsReport) -> [f64; 9] {
    [
        r.final_coverage_pct,
        r.total_energy,
        r.mean_energy,
        r.redundancy_pct,
        r.lifetime_episodes,
        r.stability,
        r.recovery_time_s,
        r.localization_error_m,
        r.convergence_episode,
    ]
}

/// One row per method: `method,runs,<field>_mean,<field>_std,...`
/// (population standard deviation over seeds).
pub fn write_comparison_csv(reports: &[MetricsReport], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["method".to_string(), "runs".to_string()];
    for f in COMPARISON_FIELDS {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_std"));
    }
    out.write_record(&header)?;
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    for m in methods {
        let rows: Vec<&MetricsReport> = reports.iter().filter(|r| r.method == m).collect();
        let mut record = vec![m.to_string(), rows.len().to_string()];
        for i in 0..COMPARISON_FIELDS.len() {
            let xs: Vec<f64> = rows.iter().map(|r| field_values(r)[i]).collect();
            let (mean, std) = mean_std(&xs);
            record.push(format!("{mean:.6}"));
            record.push(format!("{std:.6}"));
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}
