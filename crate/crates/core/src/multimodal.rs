//! Multi-hypothesis trajectory prediction: the relaxed winner-takes-all
//! loss, a direct fitter over hypothesis positions, and the rule that picks
//! the trajectory to execute.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CollisionModel, Point3, PointCloud, Vec3};
use crate::trajectory::{project_quintic, snap_cost, DiscreteTrajectory, InitialState, SAMPLE_DT};

/// Position-only trajectory sampled at `t_i = i / 10`.
pub type Positions = Vec<Point3>;

/// Predicted trajectories with their predicted collision costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub trajectories: Vec<Positions>,
    pub costs: Vec<f64>,
}

impl HypothesisSet {
    pub fn new(trajectories: Vec<Positions>, costs: Vec<f64>) -> Result<Self> {
        let set = Self { trajectories, costs };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(invalid("a hypothesis set needs at least one trajectory"));
        }
        if self.costs.len() != self.trajectories.len() {
            return Err(invalid("one predicted cost per hypothesis is required"));
        }
        if self.costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(invalid("predicted costs must be finite and non-negative"));
        }
        uniform_length(&self.trajectories)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn discrete(&self, k: usize) -> Result<DiscreteTrajectory> {
        DiscreteTrajectory::from_positions(self.trajectories[k].clone())
    }
}

/// Expert trajectories with their ground-truth costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub trajectories: Vec<Positions>,
    pub costs: Vec<f64>,
}

impl LabelSet {
    pub fn from_trajectories(trajs: &[DiscreteTrajectory], costs: Vec<f64>) -> Result<Self> {
        if trajs.len() != costs.len() {
            return Err(invalid("one cost per label trajectory is required"));
        }
        let trajectories: Vec<Positions> = trajs.iter().map(|t| t.positions().copied().collect()).collect();
        uniform_length(&trajectories)?;
        Ok(Self { trajectories, costs })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

fn uniform_length(trajs: &[Positions]) -> Result<usize> {
    let n = trajs.first().map_or(0, Vec::len);
    if trajs.iter().any(|t| t.len() != n) {
        return Err(invalid("all trajectories must have the same number of samples"));
    }
    if trajs.iter().flatten().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(invalid("trajectory positions must be finite"));
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Relaxation `ε`: the nearest hypothesis gets `1 − ε`.
    pub epsilon: f64,
    /// Weight of the trajectory term.
    pub lambda1: f64,
    /// Weight of the cost-regression term.
    pub lambda2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, lambda1: 10.0, lambda2: 0.1 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(invalid("loss weights must be non-negative"));
        }
        Ok(())
    }
}

fn squared_distance(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum()
}

fn check_shapes(labels: &LabelSet, hyps: &HypothesisSet) -> Result<()> {
    hyps.validate()?;
    let n = uniform_length(&labels.trajectories)?;
    if !labels.is_empty() && n != hyps.trajectories[0].len() {
        return Err(invalid(format!(
            "labels have {n} samples but hypotheses have {}",
            hyps.trajectories[0].len()
        )));
    }
    Ok(())
}

/// Index of the hypothesis nearest to `label`; ties go to the lower index.
fn nearest(label: &[Point3], hyps: &HypothesisSet) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, h) in hyps.trajectories.iter().enumerate() {
        let d = squared_distance(label, h);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Assignment weights `α[i][k]`: `1 − ε` for the hypothesis nearest to label
/// `i`, `ε / (M − 1)` for the others, and `1` when `M = 1`.
pub fn assignment_weights(labels: &LabelSet, hyps: &HypothesisSet, cfg: &LossConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_shapes(labels, hyps)?;
    let m = hyps.len();
    Ok(labels
        .trajectories
        .iter()
        .map(|l| {
            if m == 1 {
                return vec![1.0];
            }
            let k_star = nearest(l, hyps);
            (0..m).map(|k| if k == k_star { 1.0 - cfg.epsilon } else { cfg.epsilon / (m - 1) as f64 }).collect()
        })
        .collect())
}

/// Relaxed winner-takes-all loss `Σ_i Σ_k α_ik ‖τ_e^i − τ_n^k‖²` and its
/// gradient with respect to every hypothesis position, assignment held fixed.
pub fn rwta_loss(labels: &LabelSet, hyps: &HypothesisSet, cfg: &LossConfig) -> Result<(f64, Vec<Vec<Vec3>>)> {
    let alpha = assignment_weights(labels, hyps, cfg)?;
    let mut grad: Vec<Vec<Vec3>> = hyps.trajectories.iter().map(|h| vec![Vec3::zeros(); h.len()]).collect();
    let mut loss = 0.0;
    for (label, weights) in labels.trajectories.iter().zip(&alpha) {
        for (k, (h, &a)) in hyps.trajectories.iter().zip(weights).enumerate() {
            loss += a * squared_distance(label, h);
            for (g, (p, q)) in grad[k].iter_mut().zip(h.iter().zip(label)) {
                *g += (p - q) * (2.0 * a);
            }
        }
    }
    Ok((loss, grad))
}

/// Collision term of a trajectory: `0.1 · Σ_i C(d_c(τ(t_i)))`.
pub fn collision_cost_of(positions: &[Point3], cloud: &PointCloud, model: &CollisionModel) -> f64 {
    positions.iter().map(|p| model.cost_at(cloud, p)).sum::<f64>() * SAMPLE_DT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalLoss {
    pub total: f64,
    pub rwta: f64,
    /// `Σ_k (c_k − C_collision(τ_n^k))²`, absent without a cloud.
    pub cost_term: Option<f64>,
    pub cost_term_skipped: bool,
}

/// `λ1 · R-WTA + λ2 · Σ_k (c_k − C_collision(τ_n^k))²`. Without a cloud the
/// cost term is skipped and flagged.
pub fn total_loss(
    labels: &LabelSet,
    hyps: &HypothesisSet,
    cfg: &LossConfig,
    cloud: Option<&PointCloud>,
    model: &CollisionModel,
) -> Result<TotalLoss> {
    let (rwta, _) = rwta_loss(labels, hyps, cfg)?;
    let cost_term = cloud.map(|c| {
        hyps.trajectories
            .iter()
            .zip(&hyps.costs)
            .map(|(h, ck)| (ck - collision_cost_of(h, c, model)).powi(2))
            .sum::<f64>()
    });
    Ok(TotalLoss {
        total: cfg.lambda1 * rwta + cfg.lambda2 * cost_term.unwrap_or(0.0),
        rwta,
        cost_term,
        cost_term_skipped: cost_term.is_none(),
    })
}

/// Result of [`fit_hypotheses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub hypotheses: HypothesisSet,
    /// R-WTA loss before each step, followed by the final loss.
    pub loss_trace: Vec<f64>,
}

impl FitResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// Fitting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Divergence is declared when the loss exceeds its value `patience`
    /// steps earlier.
    pub patience: usize,
    /// Standard deviation of the initial jitter around the label mean,
    /// relative to the labels' RMS spread.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { steps: 500, step_size: 1e-3, patience: 10, jitter: 0.05, seed: 0 }
    }
}

/// Fixed-step gradient descent on `m` hypothesis positions under the R-WTA
/// loss, starting from the label mean plus seeded jitter. Predicted costs
/// are set to the mean label cost.
pub fn fit_hypotheses(labels: &LabelSet, m: usize, loss: &LossConfig, fit: &FitConfig) -> Result<FitResult> {
    loss.validate()?;
    if m == 0 {
        return Err(invalid("at least one hypothesis is required"));
    }
    if labels.is_empty() {
        return Err(invalid("fitting needs at least one label"));
    }
    if !(fit.step_size > 0.0 && fit.step_size.is_finite()) || fit.patience == 0 {
        return Err(invalid("step size and patience must be positive"));
    }
    let n = uniform_length(&labels.trajectories)?;
    let count = labels.len() as f64;
    let mean: Positions = (0..n)
        .map(|j| labels.trajectories.iter().fold(Vec3::zeros(), |acc, t| acc + t[j]) / count)
        .collect();
    let spread = (labels.trajectories.iter().map(|t| squared_distance(t, &mean)).sum::<f64>() / (count * n as f64)).sqrt();
    let mut rng = crate::rng_from_seed(fit.seed);
    let sigma = fit.jitter * spread.max(1e-12);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let trajectories = (0..m)
        .map(|_| mean.iter().map(|p| p + Vec3::from_fn(|_, _| normal.sample(&mut rng))).collect())
        .collect();
    let mean_cost = labels.costs.iter().sum::<f64>() / count;
    let mut hyps = HypothesisSet { trajectories, costs: vec![mean_cost.max(0.0); m] };

    let mut trace = Vec::with_capacity(fit.steps + 1);
    for step in 0..fit.steps {
        let (value, grad) = rwta_loss(labels, &hyps, loss)?;
        trace.push(value);
        let diverged = !value.is_finite() || (step >= fit.patience && value > trace[step - fit.patience] * (1.0 + 1e-9) + 1e-12);
        if diverged {
            return Err(Error::Diverged { step, trace });
        }
        for (h, g) in hyps.trajectories.iter_mut().zip(&grad) {
            for (p, d) in h.iter_mut().zip(g) {
                *p -= d * fit.step_size;
            }
        }
    }
    let (value, _) = rwta_loss(labels, &hyps, loss)?;
    if !value.is_finite() {
        return Err(Error::Diverged { step: fit.steps, trace });
    }
    trace.push(value);
    Ok(FitResult { hypotheses: hyps, loss_trace: trace })
}

/// Two clusters of straight trajectories offset by `±spread` along y with
/// isotropic Gaussian noise `noise` per sample; `per_cluster` labels each.
pub fn bimodal_labels(per_cluster: usize, spread: f64, noise: f64, seed: u64) -> Result<LabelSet> {
    if !(spread > 0.0 && noise >= 0.0) {
        return Err(invalid("spread must be positive and noise non-negative"));
    }
    let mut rng = crate::rng_from_seed(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| invalid(e.to_string()))?;
    let mut trajectories = Vec::with_capacity(2 * per_cluster);
    for side in [1.0, -1.0] {
        for _ in 0..per_cluster {
            let t: Positions = (1..=10)
                .map(|i| {
                    let base = Point3::new(0.3 * i as f64, side * spread, 2.0);
                    base + Vec3::from_fn(|_, _| normal.sample(&mut rng))
                })
                .collect();
            trajectories.push(t);
        }
    }
    let costs = (0..trajectories.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    Ok(LabelSet { trajectories, costs })
}

/// Ratio threshold of the execution rule.
pub const SELECTION_RATIO: f64 = 0.95;

/// Among hypotheses whose cost is within the ratio `c*/c_k ≥ 0.95` of the
/// best, pick the one whose quintic projection from `init` has the least
/// snap. With `c* = 0` every zero-cost hypothesis is a candidate.
pub fn select_for_execution(hyps: &HypothesisSet, init: &InitialState) -> Result<usize> {
    hyps.validate()?;
    let c_star = hyps.costs.iter().copied().fold(f64::INFINITY, f64::min);
    let candidates: Vec<usize> = (0..hyps.len())
        .filter(|&k| {
            let ck = hyps.costs[k];
            if c_star == 0.0 {
                ck == 0.0
            } else {
                c_star / ck >= SELECTION_RATIO
            }
        })
        .collect();
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let mut best: Option<(f64, usize)> = None;
    for k in candidates {
        let q = project_quintic(&hyps.discrete(k)?, init)?;
        let s = snap_cost(&q);
        if best.is_none_or(|(bs, _)| s < bs) {
            best = Some((s, k));
        }
    }
    Ok(best.expect("the minimum-cost hypothesis is always a candidate").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(y: f64) -> Positions {
        (1..=10).map(|i| Point3::new(0.3 * i as f64, y, 2.0)).collect()
    }

    #[test]
    fn single_hypothesis_is_plain_squared_error() {
        let labels = LabelSet { trajectories: vec![traj(1.0), traj(-0.5)], costs: vec![0.0, 0.0] };
        let hyps = HypothesisSet::new(vec![traj(0.2)], vec![0.0]).unwrap();
        let (loss, _) = rwta_loss(&labels, &hyps, &LossConfig::default()).unwrap();
        let plain = squared_distance(&traj(1.0), &traj(0.2)) + squared_distance(&traj(-0.5), &traj(0.2));
        assert!((loss - plain).abs() < 1e-12);
    }

    #[test]
    fn three_hypothesis_substitution() {
        let labels = LabelSet { trajectories: vec![traj(0.0)], costs: vec![0.0] };
        let hyps = HypothesisSet::new(vec![traj(2.0), traj(0.1), traj(-1.0)], vec![0.0; 3]).unwrap();
        let (loss, _) = rwta_loss(&labels, &hyps, &LossConfig::default()).unwrap();
        let (d, e, f) = (10.0 * 0.01, 10.0 * 4.0, 10.0 * 1.0);
        assert!((loss - (0.95 * d + 0.025 * (e + f))).abs() < 1e-12);
    }

    #[test]
    fn empty_labels_give_zero() {
        let labels = LabelSet { trajectories: vec![], costs: vec![] };
        let hyps = HypothesisSet::new(vec![traj(0.0)], vec![0.0]).unwrap();
        assert_eq!(rwta_loss(&labels, &hyps, &LossConfig::default()).unwrap().0, 0.0);
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let labels = LabelSet { trajectories: vec![traj(0.0)[..5].to_vec()], costs: vec![0.0] };
        let hyps = HypothesisSet::new(vec![traj(0.0)], vec![0.0]).unwrap();
        assert!(rwta_loss(&labels, &hyps, &LossConfig::default()).is_err());
        assert!(HypothesisSet::new(vec![], vec![]).is_err());
        assert!(LossConfig { epsilon: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn total_loss_cases() {
        let cfg = LossConfig::default();
        let model = CollisionModel::default();
        let cloud = PointCloud::new(vec![Point3::new(0.3, 0.0, 2.0)]).unwrap();
        let h = traj(0.0);
        let c = collision_cost_of(&h, &cloud, &model);
        // Contact at sample 1, 0.3 m from sample 2: 0.1·(4 + 1.75).
        assert!((c - 0.575).abs() < 1e-12);
        let labels = LabelSet { trajectories: vec![h.clone()], costs: vec![c] };
        let hyps = HypothesisSet::new(vec![h.clone()], vec![c]).unwrap();
        assert_eq!(total_loss(&labels, &hyps, &cfg, Some(&cloud), &model).unwrap().total, 0.0);
        let off = HypothesisSet::new(vec![h], vec![c + 0.3]).unwrap();
        let t = total_loss(&labels, &off, &cfg, Some(&cloud), &model).unwrap();
        assert!((t.total - 0.1 * 0.09).abs() < 1e-12);
        let skipped = total_loss(&labels, &off, &cfg, None, &model).unwrap();
        assert!(skipped.cost_term_skipped && skipped.cost_term.is_none());
        assert_eq!(skipped.total, 0.0);
    }

    #[test]
    fn selection_examples() {
        let init = InitialState::new(Point3::new(0.0, 0.0, 2.0), Vec3::new(3.0, 0.0, 0.0), Vec3::zeros());
        let smooth = traj(0.0);
        let wiggly: Positions = (1..=10).map(|i| Point3::new(0.3 * i as f64, 0.3 * (i as f64).sin(), 2.0)).collect();
        let h = HypothesisSet::new(vec![wiggly.clone(), smooth.clone(), smooth.clone()], vec![1.0, 5.0, 5.0]).unwrap();
        assert_eq!(select_for_execution(&h, &init).unwrap(), 0);
        let h = HypothesisSet::new(vec![wiggly.clone(), smooth.clone(), smooth.clone()], vec![1.0, 1.02, 3.0]).unwrap();
        assert_eq!(select_for_execution(&h, &init).unwrap(), 1);
        let h = HypothesisSet::new(vec![smooth.clone(), smooth.clone()], vec![2.0, 2.0]).unwrap();
        assert_eq!(select_for_execution(&h, &init).unwrap(), 0);
        let h = HypothesisSet::new(vec![wiggly, smooth.clone(), smooth], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(select_for_execution(&h, &init).unwrap(), 1);
    }

    #[test]
    fn identical_labels_attract_all_hypotheses() {
        let labels = LabelSet { trajectories: vec![traj(0.5); 20], costs: vec![0.0; 20] };
        let fit = FitConfig { steps: 2000, step_size: 0.02, ..Default::default() };
        let r = fit_hypotheses(&labels, 3, &LossConfig::default(), &fit).unwrap();
        for h in &r.hypotheses.trajectories {
            assert!(squared_distance(h, &traj(0.5)).sqrt() < 1e-6);
        }
    }

    #[test]
    fn oversized_step_reports_divergence() {
        let labels = bimodal_labels(20, 1.0, 0.1, 0).unwrap();
        let fit = FitConfig { steps: 200, step_size: 1.0, ..Default::default() };
        match fit_hypotheses(&labels, 3, &LossConfig::default(), &fit) {
            Err(Error::Diverged { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
