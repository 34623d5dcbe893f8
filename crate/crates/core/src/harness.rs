//! Receding-horizon simulation harness.
//!
//! A point-mass vehicle replans every `replan_period`, executes the selected
//! trajectory with ideal tracking of the commanded acceleration, and is
//! checked for collisions on its true state. Success means reaching the goal
//! radius without a collision.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{gen_forest, gen_gap_wall, gen_pole, gen_shapes, ForestSpec, GapWallSpec, PoleSpec, Region, Scenario, ShapeFieldSpec};
use crate::error::{invalid, Error, Result};
use crate::expert::{mh_label, reference_path, ExpertConfig, ProposalSchedule};
use crate::geometry::{Point3, PointCloud, Vec3};
use crate::multimodal::{select_for_execution, HypothesisSet};
use crate::trajectory::{project_time_scaled, DiscreteTrajectory, InitialState, QuinticTrajectory, ReferencePath, SAMPLE_DT};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
/// Longest time step of the collision check along executed segments, seconds.
pub const COLLISION_DT: f64 = 0.01;
/// Longest distance step of the collision check, meters.
pub const COLLISION_STRIDE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Expert conditioned on the global plan.
    Expert,
    /// Expert on the raw reference.
    ExpertLocal,
    /// Follow the raw reference.
    Blind,
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expert" => Ok(Self::Expert),
            "expert_local" | "expert-local" => Ok(Self::ExpertLocal),
            "blind" => Ok(Self::Blind),
            _ => Err(invalid(format!("unknown policy {s:?}; expected expert, expert_local or blind"))),
        }
    }
}

/// State-estimation and actuation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mean of the additive velocity error, m/s.
    pub velocity_mean: Vec3,
    /// Standard deviation of the additive velocity error, m/s.
    pub velocity_std: Vec3,
    /// Range of the per-rollout collective thrust multiplier.
    pub thrust_range: (f64, f64),
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            velocity_mean: Vec3::new(0.009, -0.198, -0.570),
            velocity_std: Vec3::new(0.496, 0.210, 1.243),
            thrust_range: (0.9, 1.0),
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if self.velocity_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid("noise standard deviations must be non-negative"));
        }
        let (lo, hi) = self.thrust_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("thrust multiplier range must satisfy 0 < low ≤ high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub v_des: f64,
    pub replan_period: f64,
    pub policy: Policy,
    pub noise: Option<NoiseModel>,
    pub expert: ExpertConfig,
    /// Time budget as a multiple of the nominal traversal time.
    pub timeout_factor: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            v_des: 3.0,
            replan_period: 0.1,
            policy: Policy::Expert,
            noise: None,
            expert: ExpertConfig::default(),
            timeout_factor: 3.0,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_des > 0.0 && self.v_des.is_finite()) {
            return Err(invalid(format!("desired speed must be positive, got {}", self.v_des)));
        }
        let k = self.replan_period / SAMPLE_DT;
        if !(self.replan_period > 0.0) || (k - k.round()).abs() > 1e-9 {
            return Err(invalid("replan period must be a positive multiple of 0.1 s"));
        }
        if !(self.timeout_factor > 0.0) {
            return Err(invalid("timeout factor must be positive"));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        self.expert.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    /// The expert found no collision-free trajectory.
    Infeasible,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
            Self::Infeasible => "infeasible",
        }
    }
}

/// One executed segment: the trajectory and the true state it started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_time: f64,
    pub duration: f64,
    pub true_start: InitialState,
    pub perceived_start: InitialState,
    pub trajectory: QuinticTrajectory,
    pub thrust_multiplier: f64,
}

impl Segment {
    /// True state `τ` seconds into the segment. The commanded acceleration is
    /// `β² μ''(βτ)`; the thrust multiplier `m` scales the collective thrust,
    /// so the vehicle realizes `m·a_cmd + (m − 1)·g·e_z`.
    pub fn state_at(&self, tau: f64) -> InitialState {
        let m = self.thrust_multiplier;
        let (p, v, a) = self.trajectory.eval_scaled(tau);
        let (p0, v0, _) = self.trajectory.eval_scaled(0.0);
        let g = Vec3::new(0.0, 0.0, GRAVITY);
        let s = self.true_start;
        InitialState {
            position: s.position + s.velocity * tau + (p - p0 - v0 * tau) * m + g * ((m - 1.0) * tau * tau / 2.0),
            velocity: s.velocity + (v - v0) * m + g * ((m - 1.0) * tau),
            acceleration: a * m + g * (m - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub speed: f64,
    pub seed: u64,
    pub outcome: Outcome,
    pub flight_time: f64,
    /// Distance flown divided by flight time.
    pub mean_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cause: Option<String>,
    #[serde(skip)]
    pub path: Vec<Point3>,
    #[serde(skip)]
    pub segments: Vec<Segment>,
}

fn mix(a: u64, b: u64) -> u64 {
    // SplitMix64 finalizer over the pair.
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_add(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smallest obstacle distance along the time-scaled quintic through `traj`
/// over the unit parameter interval; `None` if it cannot be projected.
fn execution_clearance(traj: &DiscreteTrajectory, init: &InitialState, v_des: f64, cloud: &PointCloud) -> Option<f64> {
    let q = project_time_scaled(traj, init, v_des).ok()?;
    let steps = ((q.unit_displacement() * 2.0 / COLLISION_STRIDE).ceil() as usize).max(100);
    Some((0..=steps).map(|i| cloud.distance_or_inf(&q.position(i as f64 / steps as f64))).fold(f64::INFINITY, f64::min))
}

/// Fly `scenario` once under `cfg`.
///
/// Expert policies apply [`select_for_execution`] among the label
/// trajectories whose time-scaled quintic is itself collision-free; when
/// none is, the one with the most clearance is flown.
pub fn rollout(scenario: &Scenario, cfg: &RolloutConfig, seed: u64) -> Result<RolloutResult> {
    cfg.validate()?;
    let path: ReferencePath = match cfg.policy {
        Policy::Expert => reference_path(scenario, &cfg.expert, true)?,
        Policy::ExpertLocal | Policy::Blind => ReferencePath::from_trajectory(&scenario.reference)?,
    };
    let nominal = ReferencePath::from_trajectory(&scenario.reference)?.length().max(path.length()) / cfg.v_des;
    let budget = cfg.timeout_factor * nominal.max(SAMPLE_DT);
    let cloud = &scenario.cloud;
    let model = cfg.expert.collision;

    let mut rng = crate::rng_from_seed(mix(seed, 0x5EED));
    let thrust = match &cfg.noise {
        Some(n) if n.thrust_range.1 > n.thrust_range.0 => rng.random_range(n.thrust_range.0..n.thrust_range.1),
        Some(n) => n.thrust_range.0,
        None => 1.0,
    };
    let vel_noise: Option<[Normal<f64>; 3]> = match &cfg.noise {
        Some(n) => Some(
            std::array::from_fn(|k| Normal::new(n.velocity_mean[k], n.velocity_std[k]).expect("validated noise")),
        ),
        None => None,
    };

    let start = scenario.start.position;
    let mut s = path.project(&start, None);
    let mut state = InitialState::new(start, path.tangent_at(s) * cfg.v_des, Vec3::zeros());
    let mut time = 0.0;
    let mut distance = 0.0;
    let mut trail = vec![start];
    let mut segments = Vec::new();
    let fine = ((cfg.replan_period / COLLISION_DT).round() as usize)
        .max((cfg.v_des * cfg.replan_period / COLLISION_STRIDE).ceil() as usize);
    let dt = cfg.replan_period / fine as f64;
    let finish = |outcome: Outcome, time: f64, distance: f64, cause: Option<String>, path: Vec<Point3>, segments: Vec<Segment>| {
        Ok(RolloutResult {
            speed: cfg.v_des,
            seed,
            outcome,
            flight_time: time,
            mean_speed: if time > 0.0 { distance / time } else { 0.0 },
            cause,
            path,
            segments,
        })
    };

    if model.point_in_collision(cloud, &start) {
        return finish(Outcome::Collision, 0.0, 0.0, None, trail, segments);
    }
    let mut step: u64 = 0;
    while time < budget - 1e-9 {
        let mut perceived = state;
        if let Some(noise) = &vel_noise {
            perceived.velocity += Vec3::from_fn(|k, _| noise[k].sample(&mut rng));
        }
        let window = path.window(s, cfg.v_des);
        let chosen = match cfg.policy {
            Policy::Blind => window,
            Policy::Expert | Policy::ExpertLocal => {
                let expert = ExpertConfig { seed: mix(seed, step), ..cfg.expert.clone() };
                let label = match mh_label(&window, cloud, &perceived, &expert) {
                    Ok(l) => l,
                    Err(Error::Infeasible { samples }) => {
                        let cause = format!("no collision-free sample among {samples} at t={time:.1}s");
                        return finish(Outcome::Infeasible, time, distance, Some(cause), trail, segments);
                    }
                    Err(e) => return Err(e),
                };
                let clearance: Vec<Option<f64>> = label
                    .trajectories
                    .iter()
                    .map(|t| execution_clearance(t, &perceived, cfg.v_des, cloud))
                    .collect();
                let safe: Vec<usize> =
                    (0..label.len()).filter(|&k| clearance[k].is_some_and(|d| d > model.radius)).collect();
                let k = if safe.is_empty() {
                    (0..label.len())
                        .max_by(|&a, &b| clearance[a].unwrap_or(-1.0).total_cmp(&clearance[b].unwrap_or(-1.0)).then(b.cmp(&a)))
                        .expect("labels are never empty")
                } else {
                    let hyps = HypothesisSet::new(
                        safe.iter().map(|&k| label.trajectories[k].positions().copied().collect()).collect(),
                        safe.iter().map(|&k| label.costs[k]).collect(),
                    )?;
                    safe[select_for_execution(&hyps, &perceived)?]
                };
                label.trajectories[k].clone()
            }
        };
        let trajectory = match project_time_scaled(&chosen, &perceived, cfg.v_des) {
            Ok(q) => q,
            Err(Error::DegenerateTrajectory) => {
                let cause = format!("degenerate plan at t={time:.1}s");
                return finish(Outcome::Timeout, time, distance, Some(cause), trail, segments);
            }
            Err(e) => return Err(e),
        };
        let segment = Segment {
            start_time: time,
            duration: cfg.replan_period,
            true_start: state,
            perceived_start: perceived,
            trajectory,
            thrust_multiplier: thrust,
        };
        let mut last = state.position;
        for k in 1..=fine {
            let tau = k as f64 * dt;
            let p = segment.state_at(tau).position;
            distance += (p - last).norm();
            last = p;
            if model.point_in_collision(cloud, &p) {
                trail.push(p);
                segments.push(segment);
                return finish(Outcome::Collision, time + tau, distance, None, trail, segments);
            }
            if (p - scenario.goal).norm() <= scenario.goal_radius {
                trail.push(p);
                segments.push(segment);
                return finish(Outcome::Success, time + tau, distance, None, trail, segments);
            }
        }
        state = segment.state_at(cfg.replan_period);
        segments.push(segment);
        time += cfg.replan_period;
        trail.push(state.position);
        let reach = cfg.v_des * cfg.replan_period;
        s = path.project(&state.position, Some((s - reach - 1.0, s + 3.0 * reach + 1.0)));
        step += 1;
    }
    finish(Outcome::Timeout, time, distance, None, trail, segments)
}

/// Scenario family swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Environment {
    Forest { density: f64 },
    Shapes { density: f64 },
    Gap,
    Pole,
}

impl Environment {
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        match *self {
            Self::Forest { density } => {
                let base = ForestSpec::default();
                gen_forest(&ForestSpec { region: Region { intensity: density, ..base.region }, seed, ..base })
            }
            Self::Shapes { density } => {
                let base = ShapeFieldSpec::default();
                gen_shapes(&ShapeFieldSpec { region: Region { intensity: density, ..base.region }, seed, ..base })
            }
            Self::Gap => gen_gap_wall(&GapWallSpec { seed, ..Default::default() }),
            Self::Pole => gen_pole(&PoleSpec::default()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Forest { .. } => "forest",
            Self::Shapes { .. } => "shapes",
            Self::Gap => "gap",
            Self::Pole => "pole",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub speeds: Vec<f64>,
    /// Scenario realizations per speed; the same realizations are flown at
    /// every speed.
    pub seeds: usize,
    pub master_seed: u64,
    /// Per-rollout settings; `v_des` is overridden by each speed.
    pub rollout: RolloutConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { speeds: vec![3.0, 5.0, 7.0, 10.0, 12.0], seeds: 10, master_seed: 0, rollout: RolloutConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub speed: f64,
    pub success_rate: f64,
    pub runs: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub environment: String,
    pub policy: Policy,
    pub cells: Vec<RolloutResult>,
    pub aggregate: Vec<Aggregate>,
}

impl RunReport {
    pub fn from_cells(environment: &str, policy: Policy, cells: Vec<RolloutResult>) -> Self {
        let mut speeds: Vec<f64> = Vec::new();
        for c in &cells {
            if !speeds.contains(&c.speed) {
                speeds.push(c.speed);
            }
        }
        let aggregate = speeds
            .into_iter()
            .map(|speed| {
                let runs = cells.iter().filter(|c| c.speed == speed).count();
                let successes = cells.iter().filter(|c| c.speed == speed && c.outcome == Outcome::Success).count();
                Aggregate { speed, success_rate: successes as f64 / runs as f64, runs, successes }
            })
            .collect();
        Self { environment: environment.to_string(), policy, cells, aggregate }
    }

    pub fn success_rate(&self, speed: f64) -> Option<f64> {
        self.aggregate.iter().find(|a| a.speed == speed).map(|a| a.success_rate)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `speed,seed,outcome,flight_time` rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("speed,seed,outcome,flight_time\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}\n", c.speed, c.seed, c.outcome.as_str(), c.flight_time));
        }
        out
    }
}

/// Fly every (speed, realization) cell. Cells run in parallel on the current
/// rayon pool; results are ordered by speed, then realization.
pub fn sweep(env: &Environment, cfg: &RunConfig) -> Result<RunReport> {
    if cfg.speeds.is_empty() || cfg.seeds == 0 {
        return Err(invalid("a sweep needs at least one speed and one seed"));
    }
    for &v in &cfg.speeds {
        RolloutConfig { v_des: v, ..cfg.rollout.clone() }.validate()?;
    }
    let scenarios: Vec<Scenario> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|i| env.scenario(cfg.master_seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.speeds.len()).flat_map(|v| (0..cfg.seeds).map(move |i| (v, i))).collect();
    let results = cells
        .into_par_iter()
        .map(|(v, i)| {
            let rc = RolloutConfig { v_des: cfg.speeds[v], ..cfg.rollout.clone() };
            let seed = cfg.master_seed.wrapping_add(i as u64);
            rollout(&scenarios[i], &rc, mix(seed, v as u64))
                .map(|r| RolloutResult { seed, ..r })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport::from_cells(env.name(), cfg.rollout.policy, results))
}

/// Sample budget used per replanning step in long sweeps: 6000 proposals,
/// schedule switching every 2000.
pub fn sweep_expert_config() -> ExpertConfig {
    ExpertConfig {
        total_samples: 6000,
        schedule: ProposalSchedule { variances: vec![2.0, 5.0, 10.0], switch_every: 2000 },
        ..ExpertConfig::default()
    }
}
