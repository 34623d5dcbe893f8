use mhplan_core::multimodal::{
    assignment_weights, bimodal_labels, fit_hypotheses, rwta_loss, FitConfig, HypothesisSet, LabelSet, LossConfig,
};
use mhplan_core::{Point3, Vec3};
use proptest::prelude::*;

fn positions(n: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), n)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
}

fn sets(max_m: usize) -> impl Strategy<Value = (LabelSet, HypothesisSet)> {
    (1..=max_m, 1..6usize).prop_flat_map(|(m, l)| {
        (prop::collection::vec(positions(10), l), prop::collection::vec(positions(10), m)).prop_map(
            move |(labels, hyps)| {
                let label_set = LabelSet { costs: vec![0.0; labels.len()], trajectories: labels };
                let hyp_set = HypothesisSet { costs: vec![0.0; hyps.len()], trajectories: hyps };
                (label_set, hyp_set)
            },
        )
    })
}

fn plain_squared_error(labels: &LabelSet, h: &[Point3]) -> f64 {
    labels.trajectories.iter().map(|l| l.iter().zip(h).map(|(a, b)| (a - b).norm_squared()).sum::<f64>()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn weights_sum_to_one((labels, hyps) in sets(4)) {
        let w = assignment_weights(&labels, &hyps, &LossConfig::default()).unwrap();
        for row in &w {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&a| a > 0.0));
        }
    }

    #[test]
    fn gradient_matches_central_differences((labels, hyps) in sets(3)) {
        let cfg = LossConfig::default();
        let (_, grad) = rwta_loss(&labels, &hyps, &cfg).unwrap();
        let h = 1e-6;
        for k in 0..hyps.len() {
            for j in 0..10 {
                for c in 0..3 {
                    let mut plus = hyps.clone();
                    plus.trajectories[k][j][c] += h;
                    let mut minus = hyps.clone();
                    minus.trajectories[k][j][c] -= h;
                    // Skip the measure-zero set where the assignment flips.
                    let wp = assignment_weights(&labels, &plus, &cfg).unwrap();
                    let wm = assignment_weights(&labels, &minus, &cfg).unwrap();
                    prop_assume!(wp == wm);
                    let fd = (rwta_loss(&labels, &plus, &cfg).unwrap().0 - rwta_loss(&labels, &minus, &cfg).unwrap().0) / (2.0 * h);
                    let g = grad[k][j][c];
                    prop_assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "fd {fd} vs analytic {g}");
                }
            }
        }
    }

    #[test]
    fn single_hypothesis_is_plain_squared_error((labels, hyps) in sets(1)) {
        let (loss, grad) = rwta_loss(&labels, &hyps, &LossConfig::default()).unwrap();
        let h = &hyps.trajectories[0];
        prop_assert!((loss - plain_squared_error(&labels, h)).abs() <= 1e-9 * loss.max(1.0));
        for (j, g) in grad[0].iter().enumerate() {
            let expected: Vec3 = labels.trajectories.iter().map(|l| (h[j] - l[j]) * 2.0).sum();
            prop_assert!((g - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn loss_is_invariant_to_label_order((labels, hyps) in sets(3), rot in 0..6usize) {
        let cfg = LossConfig::default();
        let (a, _) = rwta_loss(&labels, &hyps, &cfg).unwrap();
        let mut shuffled = labels.clone();
        let n = shuffled.trajectories.len();
        shuffled.trajectories.rotate_left(rot % n);
        shuffled.trajectories.reverse();
        let (b, _) = rwta_loss(&shuffled, &hyps, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

fn centroid(trajs: &[Vec<Point3>]) -> Vec<Point3> {
    (0..trajs[0].len())
        .map(|j| trajs.iter().map(|t| t[j]).sum::<Vec3>() / trajs.len() as f64)
        .collect()
}

fn rms(a: &[Point3], b: &[Point3]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn three_modes_keep_both_clusters_one_mode_collapses() {
    let spread = 1.0;
    let labels = bimodal_labels(20, spread, 0.05, 7).unwrap();
    let upper = centroid(&labels.trajectories[..20]);
    let lower = centroid(&labels.trajectories[20..]);
    let all = centroid(&labels.trajectories);

    let fit = FitConfig { steps: 500, ..Default::default() };
    let three = fit_hypotheses(&labels, 3, &LossConfig::default(), &fit).unwrap();
    for target in [&upper, &lower] {
        let best = three.hypotheses.trajectories.iter().map(|h| rms(h, target)).fold(f64::INFINITY, f64::min);
        assert!(best < 0.1 * spread, "nearest hypothesis is {best:.3} m from a cluster centroid");
    }
    let one = fit_hypotheses(&labels, 1, &LossConfig::default(), &fit).unwrap();
    let d = rms(&one.hypotheses.trajectories[0], &all);
    assert!(d < 0.1 * spread, "single hypothesis is {d:.3} m from the global mean");
    assert!(rms(&one.hypotheses.trajectories[0], &upper) > 0.9 * spread);
    assert!(three.loss_trace.last().unwrap() < one.loss_trace.last().unwrap());
}
