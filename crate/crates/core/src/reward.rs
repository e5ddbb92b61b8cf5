//! Per-agent reward machine.

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, WorldState};
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hotspot {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub weight: f64,
}

/// Region importance `w(p)`: 1 everywhere plus optional Gaussian hotspots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ImportanceMap {
    #[default]
    Uniform,
    Hotspots {
        spots: Vec<Hotspot>,
    },
}

impl ImportanceMap {
    pub fn weight(&self, p: Point) -> f64 {
        match self {
            ImportanceMap::Uniform => 1.0,
            ImportanceMap::Hotspots { spots } => {
                1.0 + spots
                    .iter()
                    .map(|h| {
                        let d2 = (p.x - h.x).powi(2) + (p.y - h.y).powi(2);
                        h.weight * (-d2 / (2.0 * h.sigma * h.sigma)).exp()
                    })
                    .sum::<f64>()
            }
        }
    }
}

/// Which coverage comparison feeds the coverage-gain branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageCredit {
    /// Coverage after the step against coverage with this agent left at its
    /// previous position (everyone else moved).
    #[default]
    Marginal,
    /// Field coverage after the step against field coverage before it.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta_cov: f64,
    pub reward_gamma: f64,
    pub lambda_pen: f64,
    pub mu_pen: f64,
    pub delta_w: f64,
    pub importance: ImportanceMap,
    pub arrival_tolerance: f64,
    /// Extra penalty per unit of overlap fraction of the agent's own disc; 0 disables it.
    pub lambda_redundancy: f64,
    /// Penalty per battery unit spent in the step; 0 disables it.
    pub energy_penalty: f64,
    pub coverage_credit: CoverageCredit,
    /// Leaving the arrival disc takes the penalty branch, whatever it does to coverage.
    pub hold_station: bool,
    /// A move that lowers coverage takes the penalty branch instead of earning approach credit.
    pub penalize_coverage_loss: bool,
    /// Coverage changes smaller than this fraction of one sensing disc count as no change.
    /// Grid rasterization alone moves a disc's cell count by about one percent.
    pub coverage_floor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta_cov: 2.0,
            reward_gamma: 3.0,
            lambda_pen: 1.0,
            mu_pen: 0.5,
            delta_w: 0.0,
            importance: ImportanceMap::Uniform,
            arrival_tolerance: 3.6,
            lambda_redundancy: 0.0,
            energy_penalty: 0.0,
            coverage_credit: CoverageCredit::Marginal,
            hold_station: false,
            penalize_coverage_loss: false,
            coverage_floor: 0.02,
        }
    }
}

impl RewardConfig {
    /// Plain branch table plus the extensions that stop leave-and-return reward cycles:
    /// holding station, no approach credit for coverage-losing moves, and a per-unit energy cost.
    pub fn shaped() -> Self {
        Self { hold_station: true, penalize_coverage_loss: true, energy_penalty: 0.2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let non_neg = [
            ("alpha", self.alpha),
            ("beta_cov", self.beta_cov),
            ("reward_gamma", self.reward_gamma),
            ("lambda_pen", self.lambda_pen),
            ("mu_pen", self.mu_pen),
            ("lambda_redundancy", self.lambda_redundancy),
            ("energy_penalty", self.energy_penalty),
            ("coverage_floor", self.coverage_floor),
        ];
        for (name, v) in non_neg {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!("reward.{name} must be >= 0, got {v}")));
            }
        }
        if !(self.arrival_tolerance > 0.0) {
            return Err(Error::InvalidConfig("reward.arrival_tolerance must be > 0".into()));
        }
        if !self.delta_w.is_finite() {
            return Err(Error::NonFinite("reward.delta_w"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBranch {
    Arrived,
    CoverageGain,
    Approach,
    Penalty,
}

/// Everything the reward machine looks at for one agent and one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    pub distance_before: f64,
    pub distance_after: f64,
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub battery_after: f64,
    pub battery_threshold: f64,
    pub position_after: Point,
    pub local_overlap: f64,
    pub energy_spent: f64,
    /// Dead band on coverage changes, as a fraction of the field.
    pub coverage_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward {
    pub branch: RewardBranch,
    pub value: f64,
}

pub fn compute_reward(inp: &RewardInputs, cfg: &RewardConfig) -> Reward {
    let departed = cfg.hold_station && inp.distance_before <= cfg.arrival_tolerance;
    let lost = cfg.penalize_coverage_loss && inp.coverage_after < inp.coverage_before - inp.coverage_floor;
    let (branch, mut value) = if inp.distance_after <= cfg.arrival_tolerance {
        (RewardBranch::Arrived, cfg.alpha)
    } else if departed || lost {
        (RewardBranch::Penalty, -cfg.lambda_pen)
    } else if inp.coverage_after > inp.coverage_before + inp.coverage_floor {
        (RewardBranch::CoverageGain, cfg.beta_cov)
    } else if inp.distance_after < inp.distance_before {
        (RewardBranch::Approach, cfg.reward_gamma)
    } else {
        (RewardBranch::Penalty, -cfg.lambda_pen)
    };
    if inp.battery_after < inp.battery_threshold {
        value -= cfg.mu_pen;
    }
    value += cfg.delta_w * cfg.importance.weight(inp.position_after);
    value -= cfg.lambda_redundancy * inp.local_overlap;
    value -= cfg.energy_penalty * inp.energy_spent;
    Reward { branch, value }
}

/// Gathers the reward inputs for sensor `id` across one environment step.
pub fn reward_inputs(
    before: &WorldState,
    after: &WorldState,
    id: usize,
    env: &EnvConfig,
    cfg: &RewardConfig,
) -> RewardInputs {
    let b = &before.sensors[id];
    let a = &after.sensors[id];
    let r = env.sensing_radius;
    let coverage_after = after.coverage_fraction();
    let coverage_before = match cfg.coverage_credit {
        CoverageCredit::Global => before.coverage_fraction(),
        CoverageCredit::Marginal if a.active => after.coverage.coverage_if_moved(a.position, b.position, r),
        CoverageCredit::Marginal => after.coverage.coverage_with_extra(b.position, r),
    };
    let local_overlap =
        if a.active && cfg.lambda_redundancy > 0.0 { after.coverage.local_overlap(a.position, r) } else { 0.0 };
    RewardInputs {
        distance_before: b.distance_to_target(),
        distance_after: a.distance_to_target(),
        coverage_before,
        coverage_after,
        battery_after: a.battery,
        battery_threshold: env.battery_threshold,
        position_after: a.position,
        local_overlap,
        energy_spent: b.battery - a.battery,
        coverage_floor: cfg.coverage_floor * std::f64::consts::PI * r * r / (env.field.width * env.field.height),
    }
}
