//! The privileged expert.
//!
//! Given the obstacle cloud, the current state and a reference window, the
//! expert samples B-spline trajectories with Metropolis-Hastings under the
//! score `exp(-c)`, where `c` trades obstacle proximity against deviation
//! from the reference, and returns the best few distinct collision-free
//! samples. The reference can be the raw one or a window of a global
//! collision-free plan.

mod global;
mod mh;
mod spherical;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::environment::Scenario;
use crate::error::{invalid, Error, Result};
use crate::geometry::{CollisionModel, Point3, PointCloud};
use crate::trajectory::{
    discretize, CubicBSpline, DiscreteTrajectory, InitialState, ReferencePath, HORIZON, SAMPLE_DT,
};

pub use global::{global_plan, global_plan_with, GlobalPlan, DEFAULT_GRID_RESOLUTION};
pub use mh::{run_chain, ChainStats, ProposalSchedule, Step};
pub use spherical::{HeadingFrame, Spherical, SphericalControlPoints};

/// Resolution of the collision check applied to label candidates, seconds.
const CHECK_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Weight `λ_c` of the collision term.
    pub collision_weight: f64,
    /// Position-deviation weight, symmetric positive semidefinite.
    pub q: Matrix3<f64>,
    pub total_samples: usize,
    pub schedule: ProposalSchedule,
    /// Planning horizon in seconds; a positive multiple of 0.1 s.
    pub horizon: f64,
    pub top_k: usize,
    /// Samples closer than this (max pointwise distance) count as one.
    pub dedup_distance: f64,
    pub collision: CollisionModel,
    pub grid_resolution: f64,
    pub seed: u64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            collision_weight: 1000.0,
            q: Matrix3::identity(),
            total_samples: 50_000,
            schedule: ProposalSchedule::default(),
            horizon: HORIZON,
            top_k: 3,
            dedup_distance: 0.1,
            collision: CollisionModel::default(),
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            seed: 0,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.collision_weight >= 0.0 && self.collision_weight.is_finite()) {
            return Err(invalid("collision weight must be non-negative"));
        }
        if (self.q - self.q.transpose()).amax() > 1e-12 {
            return Err(invalid("Q must be symmetric"));
        }
        let eig = SymmetricEigen::new(self.q).eigenvalues;
        if eig.iter().any(|e| !e.is_finite() || *e < -1e-12) {
            return Err(invalid(format!("Q must be positive semidefinite, eigenvalues {eig:?}")));
        }
        self.schedule.validate()?;
        if self.top_k == 0 || self.total_samples < self.top_k {
            return Err(invalid("need top_k ≥ 1 and total_samples ≥ top_k"));
        }
        let steps = self.horizon / SAMPLE_DT;
        if !(self.horizon > 0.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(invalid(format!("horizon must be a positive multiple of 0.1 s, got {}", self.horizon)));
        }
        if !(self.dedup_distance >= 0.0) {
            return Err(invalid("dedup distance must be non-negative"));
        }
        if !(self.grid_resolution > 0.0) {
            return Err(invalid("grid resolution must be positive"));
        }
        Ok(())
    }

    pub fn horizon_samples(&self) -> usize {
        (self.horizon / SAMPLE_DT).round() as usize
    }
}

/// The best distinct collision-free samples of one chain, cheapest first.
#[derive(Debug, Clone)]
pub struct ExpertLabel {
    pub trajectories: Vec<DiscreteTrajectory>,
    pub costs: Vec<f64>,
    pub splines: Vec<CubicBSpline>,
    pub control_points: Vec<SphericalControlPoints>,
    pub stats: ChainStats,
}

#[derive(Serialize, Deserialize)]
struct LabelJson {
    trajectories: Vec<String>,
    costs: Vec<f64>,
    chain_stats: ChainStats,
}

impl ExpertLabel {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// `{"trajectories": [csv, ...], "costs": [...], "chain_stats": {...}}`.
    pub fn to_json_string(&self) -> String {
        let j = LabelJson {
            trajectories: self.trajectories.iter().map(|t| t.to_csv_string()).collect(),
            costs: self.costs.clone(),
            chain_stats: self.stats,
        };
        serde_json::to_string_pretty(&j).expect("label serializes")
    }

    /// Trajectories and costs of a label JSON document.
    pub fn read_json(text: &str) -> Result<(Vec<DiscreteTrajectory>, Vec<f64>)> {
        let j: LabelJson = serde_json::from_str(text)?;
        if j.trajectories.len() != j.costs.len() {
            return Err(invalid("label has different numbers of trajectories and costs"));
        }
        let trajs = j.trajectories.iter().map(|s| DiscreteTrajectory::from_csv_str(s)).collect::<Result<_>>()?;
        Ok((trajs, j.costs))
    }
}

fn check_times(traj: &DiscreteTrajectory, reference: &DiscreteTrajectory) -> Result<()> {
    if traj.same_times(reference) {
        Ok(())
    } else {
        Err(Error::MismatchedSamples)
    }
}

/// `0.1 · Σ_i [λ_c·C(d_c(τ(t_i))) + Δ_iᵀ Q Δ_i]` with `Δ_i = τ(t_i) − τ_ref(t_i)`.
pub fn trajectory_cost(
    traj: &DiscreteTrajectory,
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    cfg: &ExpertConfig,
) -> Result<f64> {
    check_times(traj, reference)?;
    Ok(traj
        .positions()
        .zip(reference.positions())
        .map(|(p, r)| point_cost(p, r, cloud, cfg))
        .sum::<f64>()
        * SAMPLE_DT)
}

#[inline]
fn point_cost(p: &Point3, r: &Point3, cloud: &PointCloud, cfg: &ExpertConfig) -> f64 {
    let d = p - r;
    cfg.collision_weight * cfg.collision.cost_at(cloud, p) + d.dot(&(cfg.q * d))
}

/// `exp(−cost)`; zero only through floating-point underflow. Use
/// [`log_score`] for ratios.
pub fn score(
    traj: &DiscreteTrajectory,
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    cfg: &ExpertConfig,
) -> Result<f64> {
    Ok(log_score(traj, reference, cloud, cfg)?.exp())
}

pub fn log_score(
    traj: &DiscreteTrajectory,
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    cfg: &ExpertConfig,
) -> Result<f64> {
    Ok(-trajectory_cost(traj, reference, cloud, cfg)?)
}

/// Cost of anchored splines at the reference sample times, with the basis
/// weights precomputed. Only the three free control points vary.
struct SplineCost<'a> {
    cloud: &'a PointCloud,
    cfg: &'a ExpertConfig,
    reference: Vec<Point3>,
    /// Contribution of the fixed anchors at each sample time.
    base: Vec<Point3>,
    /// Weights of the free control points at each sample time.
    weights: Vec<[f64; 3]>,
}

impl<'a> SplineCost<'a> {
    fn new(init: &InitialState, reference: &DiscreteTrajectory, cloud: &'a PointCloud, cfg: &'a ExpertConfig) -> Result<Self> {
        let zero = CubicBSpline::anchored(init, [Point3::zeros(); 3], cfg.horizon)?;
        let anchors = *zero.polygon();
        let mut base = Vec::with_capacity(reference.len());
        let mut weights = Vec::with_capacity(reference.len());
        for t in reference.times() {
            if !(0.0..=cfg.horizon + 1e-9).contains(&t) {
                return Err(invalid(format!("reference time {t} lies outside the horizon")));
            }
            let t = t.min(cfg.horizon);
            base.push(zero.position_unchecked(t));
            weights.push(std::array::from_fn(|j| {
                let mut poly = [Point3::zeros(); 6];
                poly[3 + j] = Point3::x();
                let unit = CubicBSpline::from_polygon(poly, cfg.horizon).expect("positive horizon");
                unit.position_unchecked(t).x
            }));
        }
        debug_assert!(anchors[3..].iter().all(|p| *p == Point3::zeros()));
        Ok(Self { cloud, cfg, reference: reference.positions().copied().collect(), base, weights })
    }

    fn cost(&self, cps: &[Point3; 3]) -> f64 {
        let mut total = 0.0;
        for ((b, w), r) in self.base.iter().zip(&self.weights).zip(&self.reference) {
            let p = b + cps[0] * w[0] + cps[1] * w[1] + cps[2] * w[2];
            total += point_cost(&p, r, self.cloud, self.cfg);
        }
        total * SAMPLE_DT
    }
}

/// Whether the spline clears the cloud at every `CHECK_DT` step of `(0, T]`.
fn spline_collision_free(spline: &CubicBSpline, cloud: &PointCloud, model: &CollisionModel) -> bool {
    let n = (spline.duration() / CHECK_DT).round() as usize;
    (1..=n).all(|k| {
        let t = (k as f64 * CHECK_DT).min(spline.duration());
        !model.point_in_collision(cloud, &spline.position_unchecked(t))
    })
}

fn heading_for(init: &InitialState, reference: &DiscreteTrajectory) -> nalgebra::Vector3<f64> {
    let towards = reference.last().position - init.position;
    if towards.norm() > 1e-9 {
        towards
    } else {
        init.velocity
    }
}

/// Run the chain and extract a label. `record_chain` keeps every chain state.
fn sample(
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    init: &InitialState,
    cfg: &ExpertConfig,
    record_chain: bool,
) -> Result<(Vec<SphericalControlPoints>, ExpertLabel)> {
    cfg.validate()?;
    let n = cfg.horizon_samples();
    let expected: Vec<f64> = (1..=n).map(|i| i as f64 * SAMPLE_DT).collect();
    if reference.len() != n || reference.times().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(invalid(format!("reference must be sampled at 0.1 s steps over the {} s horizon", cfg.horizon)));
    }
    let frame = HeadingFrame::new(init.position, &heading_for(init, reference));
    let evaluator = SplineCost::new(init, reference, cloud, cfg)?;
    let cost_of = |x: &[f64]| evaluator.cost(&SphericalControlPoints::from_slice(x).to_world(&frame));

    let fitted = CubicBSpline::fit(init, reference, cfg.horizon)?;
    let x0 = SphericalControlPoints::from_world(&frame, &fitted.control_points()).to_vec();

    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut evaluated: Vec<(f64, [f64; 9])> = Vec::with_capacity(cfg.total_samples + 1);
    evaluated.push((cost_of(&x0), x0));
    let mut chain = Vec::with_capacity(if record_chain { cfg.total_samples } else { 0 });
    let stats = run_chain(
        &x0,
        cfg.total_samples,
        &cfg.schedule,
        &mut rng,
        |x| -cost_of(x),
        spherical::canonicalize_slice,
        |step| {
            let mut p = [0.0; 9];
            p.copy_from_slice(step.proposal);
            evaluated.push((-step.proposal_log_score, p));
            if record_chain {
                chain.push(SphericalControlPoints::from_slice(step.state));
            }
        },
    )?;

    // Cheapest first; the stable sort keeps sampling order among equal costs.
    evaluated.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut label = ExpertLabel {
        trajectories: Vec::new(),
        costs: Vec::new(),
        splines: Vec::new(),
        control_points: Vec::new(),
        stats,
    };
    for (cost, x) in &evaluated {
        if label.len() == cfg.top_k {
            break;
        }
        let cps = SphericalControlPoints::from_slice(x);
        let spline = CubicBSpline::anchored(init, cps.to_world(&frame), cfg.horizon)?;
        if !spline_collision_free(&spline, cloud, &cfg.collision) {
            continue;
        }
        let traj = discretize(&spline);
        if label.trajectories.iter().any(|t| t.max_pointwise_distance(&traj) < cfg.dedup_distance) {
            continue;
        }
        label.trajectories.push(traj);
        label.costs.push(*cost);
        label.splines.push(spline);
        label.control_points.push(cps);
    }
    if label.is_empty() {
        return Err(Error::Infeasible { samples: cfg.total_samples });
    }
    Ok((chain, label))
}

/// Sample `cfg.total_samples` proposals and return the chain states together
/// with the label.
pub fn mh_sample(
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    init: &InitialState,
    cfg: &ExpertConfig,
) -> Result<(Vec<SphericalControlPoints>, ExpertLabel)> {
    sample(reference, cloud, init, cfg, true)
}

/// [`mh_sample`] without keeping the chain.
pub fn mh_label(
    reference: &DiscreteTrajectory,
    cloud: &PointCloud,
    init: &InitialState,
    cfg: &ExpertConfig,
) -> Result<ExpertLabel> {
    sample(reference, cloud, init, cfg, false).map(|(_, l)| l)
}

/// Reference path used by [`label`]: the global plan when requested and
/// available, otherwise the raw reference.
pub fn reference_path(scenario: &Scenario, cfg: &ExpertConfig, use_global: bool) -> Result<ReferencePath> {
    if use_global {
        match global_plan_with(scenario, cfg.grid_resolution, &cfg.collision) {
            Ok(plan) => return plan.path(),
            Err(Error::Blocked) => {}
            Err(e) => return Err(e),
        }
    }
    ReferencePath::from_trajectory(&scenario.reference)
}

/// Label the scenario's start state.
pub fn label(scenario: &Scenario, cfg: &ExpertConfig, use_global: bool) -> Result<ExpertLabel> {
    let path = reference_path(scenario, cfg, use_global)?;
    let init = scenario.start;
    let s0 = path.project(&init.position, None);
    let window = path.window_over(s0, scenario.nominal_speed, cfg.horizon_samples());
    mh_label(&window, &scenario.cloud, &init, cfg)
}
