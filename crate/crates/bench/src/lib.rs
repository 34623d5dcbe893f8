//! Fixtures shared by the criterion benchmarks.

use mhplan_core::environment::{gen_forest, ForestSpec, Scenario};
use mhplan_core::expert::{reference_path, ExpertConfig, ProposalSchedule};
use mhplan_core::multimodal::{bimodal_labels, HypothesisSet, LabelSet};
use mhplan_core::{DiscreteTrajectory, InitialState, Point3};

/// Default-density forest for a fixed seed.
pub fn forest(seed: u64) -> Scenario {
    gen_forest(&ForestSpec { seed, ..Default::default() }).expect("default forest spec is valid")
}

/// Expert settings with a reduced proposal budget.
pub fn expert_config(samples: usize) -> ExpertConfig {
    ExpertConfig {
        total_samples: samples,
        schedule: ProposalSchedule { switch_every: samples.div_ceil(3), ..Default::default() },
        ..Default::default()
    }
}

/// The 1 s reference window at the scenario start.
pub fn start_window(scenario: &Scenario, cfg: &ExpertConfig) -> DiscreteTrajectory {
    let path = reference_path(scenario, cfg, false).expect("reference is a valid path");
    let s0 = path.project(&scenario.start.position, None);
    path.window(s0, scenario.nominal_speed)
}

/// Query points spread over the forest's flight volume.
pub fn query_points(n: usize) -> Vec<Point3> {
    (0..n)
        .map(|i| {
            let u = i as f64 / n as f64;
            Point3::new(-30.0 + 60.0 * u, -15.0 + 30.0 * (u * 7.0).fract(), 1.0 + 3.0 * (u * 13.0).fract())
        })
        .collect()
}

/// Two-cluster label set with three hypotheses at the label mean.
pub fn rwta_fixture(per_cluster: usize) -> (LabelSet, HypothesisSet) {
    let labels = bimodal_labels(per_cluster, 1.0, 0.05, 0).expect("valid generator settings");
    let mean: Vec<Point3> = (0..10)
        .map(|j| labels.trajectories.iter().map(|t| t[j]).sum::<Point3>() / labels.len() as f64)
        .collect();
    let hyps = HypothesisSet { trajectories: vec![mean; 3], costs: vec![0.0; 3] };
    (labels, hyps)
}

/// A straight 10-sample trajectory and a moving start state.
pub fn projection_fixture() -> (DiscreteTrajectory, InitialState) {
    let positions = (1..=10).map(|i| Point3::new(0.3 * i as f64, 0.05 * (i * i) as f64, 2.0)).collect();
    let traj = DiscreteTrajectory::from_positions(positions).expect("ten increasing samples");
    let init = InitialState::new(Point3::new(0.0, 0.0, 2.0), Point3::new(3.0, 0.0, 0.0), Point3::zeros());
    (traj, init)
}
