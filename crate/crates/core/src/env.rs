//! Mobile sensor network environment: deployment, movement with hard
//! boundary clamping, the `E = k * d` energy model, failures and targets.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    assign_targets, build_coverage_map, coverage_fraction, hex_lattice_targets, CoverageMap, Field, Point,
};

/// Displacement in meters applied by one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
}

impl Action {
    pub const STAY: Action = Action { dx: 0.0, dy: 0.0 };

    pub fn length(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSet {
    /// Stay plus the eight compass moves.
    #[default]
    Compass9,
    /// The four diagonal moves plus stay.
    Diagonal5,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        match self {
            ActionSet::Compass9 => 9,
            ActionSet::Diagonal5 => 5,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn actions(&self, step: f64) -> Vec<Action> {
        let a = |dx: f64, dy: f64| Action { dx: dx * step, dy: dy * step };
        match self {
            ActionSet::Compass9 => vec![
                a(0.0, 0.0),
                a(0.0, 1.0),
                a(1.0, 1.0),
                a(1.0, 0.0),
                a(1.0, -1.0),
                a(0.0, -1.0),
                a(-1.0, -1.0),
                a(-1.0, 0.0),
                a(-1.0, 1.0),
            ],
            ActionSet::Diagonal5 => vec![a(1.0, 1.0), a(1.0, -1.0), a(-1.0, 1.0), a(-1.0, -1.0), a(0.0, 0.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub field: Field,
    pub n_sensors: usize,
    pub sensing_radius: f64,
    pub comm_range: f64,
    /// Maximum per-axis displacement of one step, meters.
    pub step_size: f64,
    pub initial_battery: f64,
    /// Energy units drawn per meter travelled.
    pub energy_per_meter: f64,
    pub battery_threshold: f64,
    pub steps_per_episode: usize,
    pub action_set: ActionSet,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            field: Field::default(),
            n_sensors: 100,
            sensing_radius: 20.0,
            comm_range: 50.0,
            step_size: 5.0,
            initial_battery: 100.0,
            energy_per_meter: 0.5,
            battery_threshold: 20.0,
            steps_per_episode: 1,
            action_set: ActionSet::Compass9,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("env.{name} must be positive, got {v}")))
            }
        };
        pos("sensing_radius", self.sensing_radius)?;
        pos("comm_range", self.comm_range)?;
        pos("step_size", self.step_size)?;
        pos("initial_battery", self.initial_battery)?;
        pos("energy_per_meter", self.energy_per_meter)?;
        if !(self.battery_threshold >= 0.0) {
            return Err(Error::InvalidConfig("env.battery_threshold must be >= 0".into()));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::InvalidConfig("env.steps_per_episode must be >= 1".into()));
        }
        Ok(())
    }

    pub fn actions(&self) -> Vec<Action> {
        self.action_set.actions(self.step_size)
    }

    pub fn n_actions(&self) -> usize {
        self.action_set.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub id: usize,
    pub position: Point,
    pub battery: f64,
    pub active: bool,
    pub target: Point,
    pub prev_distance_to_target: f64,
}

impl SensorState {
    pub fn distance_to_target(&self) -> f64 {
        self.position.distance(&self.target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub sensors: Vec<SensorState>,
    pub episode: usize,
    pub step: usize,
    pub coverage: CoverageMap,
    pub n_active: usize,
}

impl WorldState {
    pub fn positions(&self) -> Vec<Point> {
        self.sensors.iter().map(|s| s.position).collect()
    }

    pub fn active_flags(&self) -> Vec<bool> {
        self.sensors.iter().map(|s| s.active).collect()
    }

    pub fn coverage_fraction(&self) -> f64 {
        coverage_fraction(&self.coverage)
    }

    pub fn total_battery(&self) -> f64 {
        self.sensors.iter().map(|s| s.battery).sum()
    }

    fn rebuild_coverage(&mut self, config: &EnvConfig) -> Result<()> {
        self.coverage =
            build_coverage_map(&self.positions(), &self.active_flags(), config.sensing_radius, &config.field)?;
        self.n_active = self.sensors.iter().filter(|s| s.active).count();
        Ok(())
    }

    /// Recomputes the lattice for the currently active sensors and reassigns.
    pub fn retarget(&mut self, config: &EnvConfig) -> Result<()> {
        let active: Vec<usize> = self.sensors.iter().filter(|s| s.active).map(|s| s.id).collect();
        let sites = hex_lattice_targets(active.len(), config.sensing_radius, &config.field)?;
        let positions: Vec<Point> = active.iter().map(|&i| self.sensors[i].position).collect();
        let assignment = assign_targets(&positions, &sites);
        for (&id, &site) in active.iter().zip(&assignment) {
            let s = &mut self.sensors[id];
            s.target = sites[site];
            s.prev_distance_to_target = s.distance_to_target();
        }
        Ok(())
    }
}

/// Uniform random deployment with full batteries and lattice targets.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Point> = (0..config.n_sensors)
        .map(|_| Point::new(rng.gen::<f64>() * config.field.width, rng.gen::<f64>() * config.field.height))
        .collect();
    deploy_at(config, &positions)
}

/// Deploys sensors at explicit positions (clamped into the field).
pub fn deploy_at(config: &EnvConfig, positions: &[Point]) -> Result<WorldState> {
    config.validate()?;
    let sensors = positions
        .iter()
        .enumerate()
        .map(|(id, p)| SensorState {
            id,
            position: config.field.clamp(*p),
            battery: config.initial_battery,
            active: true,
            target: *p,
            prev_distance_to_target: 0.0,
        })
        .collect();
    let mut world =
        WorldState { sensors, episode: 0, step: 0, coverage: CoverageMap::empty(config.field), n_active: 0 };
    world.retarget(config)?;
    world.rebuild_coverage(config)?;
    Ok(world)
}

/// Moves one sensor, charging `k` per meter of realized (post-clamp) travel.
///
/// A sensor whose battery cannot pay for the whole move travels only as far
/// as the remaining charge allows, then shuts down.
pub fn apply_action(sensor: &SensorState, action: Action, config: &EnvConfig) -> Result<SensorState> {
    if !sensor.active {
        return Err(Error::InactiveSensor(sensor.id));
    }
    let mut next = sensor.clone();
    next.prev_distance_to_target = sensor.distance_to_target();
    let wanted = config.field.clamp(Point::new(sensor.position.x + action.dx, sensor.position.y + action.dy));
    let dist = sensor.position.distance(&wanted);
    if dist == 0.0 {
        return Ok(next);
    }
    let k = config.energy_per_meter;
    let affordable = sensor.battery / k;
    if dist < affordable {
        next.position = wanted;
        next.battery = sensor.battery - k * dist;
    } else {
        let t = affordable / dist;
        next.position = config.field.clamp(Point::new(
            sensor.position.x + (wanted.x - sensor.position.x) * t,
            sensor.position.y + (wanted.y - sensor.position.y) * t,
        ));
        next.battery = 0.0;
        next.active = false;
    }
    Ok(next)
}

/// Applies one action per active sensor and recomputes coverage.
pub fn step(world: &WorldState, actions: &BTreeMap<usize, Action>, config: &EnvConfig) -> Result<WorldState> {
    for &id in actions.keys() {
        let s = world.sensors.get(id).ok_or(Error::UnknownSensor(id))?;
        if !s.active {
            return Err(Error::InactiveSensor(id));
        }
    }
    let mut next = world.clone();
    for (s, out) in world.sensors.iter().zip(next.sensors.iter_mut()) {
        if !s.active {
            continue;
        }
        let action = *actions.get(&s.id).ok_or(Error::MissingAction(s.id))?;
        *out = apply_action(s, action, config)?;
    }
    next.step += 1;
    update_coverage_incremental(world, &mut next, config);
    Ok(next)
}

fn update_coverage_incremental(before: &WorldState, after: &mut WorldState, config: &EnvConfig) {
    let r = config.sensing_radius;
    for (b, a) in before.sensors.iter().zip(&after.sensors) {
        if !b.active || (a.active && a.position == b.position) {
            continue;
        }
        after.coverage.remove_disc(b.position, r);
        if a.active {
            after.coverage.add_disc(a.position, r);
        }
    }
    after.n_active = after.sensors.iter().filter(|s| s.active).count();
}

/// Forces a sensor offline and retargets the survivors.
pub fn inject_failure(world: &WorldState, sensor_id: usize, config: &EnvConfig) -> Result<WorldState> {
    let s = world.sensors.get(sensor_id).ok_or(Error::UnknownSensor(sensor_id))?;
    if !s.active {
        return Err(Error::InactiveSensor(sensor_id));
    }
    let mut next = world.clone();
    next.sensors[sensor_id].active = false;
    next.coverage.remove_disc(s.position, config.sensing_radius);
    next.n_active -= 1;
    next.retarget(config)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    pub components: usize,
}

/// Components of the geometric graph over active sensors (edge iff distance <= range).
pub fn connectivity_check(world: &WorldState, comm_range: f64) -> Connectivity {
    let nodes: Vec<Point> = world.sensors.iter().filter(|s| s.active).map(|s| s.position).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i].distance(&nodes[j]) <= comm_range {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let components = (0..nodes.len()).filter(|&i| find(&mut parent, i) == i).count();
    Connectivity { connected: components <= 1, components }
}
