//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the verdict lines are always printed.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use mhplan_core::environment::{
    gap_geometry, gen_forest, gen_gap_wall, gen_pole, ForestSpec, GapWallSpec, PoleSpec, Scenario,
};
use mhplan_core::expert::{label, run_chain, ExpertConfig, ExpertLabel, ProposalSchedule};
use mhplan_core::feasibility::{optimize_phi, SensingParams, VehicleParams, DEFAULT_GRID_STEP};
use mhplan_core::geometry::in_collision;
use mhplan_core::harness::{sweep, Environment, Policy, RolloutConfig, RunConfig};
use mhplan_core::multimodal::{
    assignment_weights, bimodal_labels, fit_hypotheses, rwta_loss, FitConfig, HypothesisSet, LabelSet, LossConfig,
};
use mhplan_core::trajectory::{project_quintic, QuinticTrajectory};
use mhplan_core::{CollisionModel, DiscreteTrajectory, InitialState, Point3, Rng, Vec3};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn feasibility_golden() -> Verdict {
    let start = Instant::now();
    let vehicle = VehicleParams { inertia: 0.007, max_torque: 1.02, max_thrust: 35.3, obstacle_radius: 0.95 };
    let mut rows = Vec::new();
    for (t_p, v_expected) in [(0.0652, 12.0), (0.0191, 13.2), (0.0103, 13.5)] {
        let sensing = SensingParams { range: 6.0, sensing_latency: 0.066, processing_latency: t_p };
        let b = optimize_phi(&vehicle, &sensing, DEFAULT_GRID_STEP).map_err(|e| e.to_string())?;
        let phi = b.phi.to_degrees();
        ensure((phi - 65.5).abs() <= 0.5, || format!("t_p={t_p}: φ*={phi:.2}°"))?;
        ensure((b.t_rot * 1e3 - 125.2).abs() <= 0.5, || format!("t_p={t_p}: t_rot={:.2} ms", b.t_rot * 1e3))?;
        ensure((b.v_max - v_expected).abs() <= 0.05, || format!("t_p={t_p}: v_max={:.3}", b.v_max))?;
        rows.push(format!("{:.1}ms→φ*={phi:.1}° t_rot={:.1}ms v={:.2}", t_p * 1e3, b.t_rot * 1e3, b.v_max));
    }
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(rows.join(", "))
}

fn collision_cost_contract() -> Verdict {
    let model = CollisionModel::default();
    let r = model.radius;
    let c = |d: f64| model.collision_cost(d).map_err(|e| e.to_string());
    ensure(c(0.0)? == 4.0, || "C(0) ≠ 4".into())?;
    ensure(c(2.0 * r)?.abs() < 1e-12, || "C(2r) ≠ 0".into())?;
    let n = 10_000;
    let d_max = 3.0 * r;
    let step = d_max / (n - 1) as f64;
    // Steepest slope of the contract is 4/r at the outer edge.
    let jump_bound = 4.0 / r * step + 1e-12;
    let mut prev = c(0.0)?;
    for i in 0..n {
        let d = i as f64 * step;
        let v = c(d)?;
        let exact = if d <= 2.0 * r { 4.0 - d * d / (r * r) } else { 0.0 };
        ensure((v - exact).abs() <= 1e-12, || format!("C({d}) = {v}, expected {exact}"))?;
        ensure(v <= prev + 1e-15, || format!("not monotone at d={d}"))?;
        ensure((v - prev).abs() <= jump_bound, || format!("jump of {} at d={d}", (v - prev).abs()))?;
        prev = v;
    }
    ensure(model.collision_cost(-1e-3).is_err(), || "negative distance accepted".into())?;
    Ok(format!("{n} grid points on [0, {d_max:.2}] m"))
}

fn mixture_cdf(x: f64) -> f64 {
    [-2.5, 2.5].iter().map(|&mu| 0.5 * Normal::new(mu, 1.0).unwrap().cdf(x)).sum()
}

fn mh_correctness() -> Verdict {
    let start = Instant::now();
    let log_density = |x: f64| {
        let (a, b) = (-0.5 * (x + 2.5).powi(2), -0.5 * (x - 2.5).powi(2));
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp()).ln()
    };
    let mut rng = mhplan_core::rng_from_seed(2024);
    let mut xs = Vec::with_capacity(50_000);
    let stats = run_chain(
        &[0.0],
        50_000,
        &ProposalSchedule::default(),
        &mut rng,
        |x| log_density(x[0]),
        |_| {},
        |s| xs.push(s.state[0]),
    )
    .map_err(|e| e.to_string())?;
    let (lo, hi, bins) = (-7.0, 7.0, 50usize);
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0usize; bins];
    for &x in &xs {
        hist[(((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize] += 1;
    }
    let tv = (0..bins)
        .map(|b| {
            let left = if b == 0 { 0.0 } else { mixture_cdf(lo + b as f64 * width) };
            let right = if b == bins - 1 { 1.0 } else { mixture_cdf(lo + (b + 1) as f64 * width) };
            (hist[b] as f64 / xs.len() as f64 - (right - left)).abs()
        })
        .sum::<f64>()
        / 2.0;
    ensure(tv <= 0.05, || format!("TV {tv:.4} > 0.05"))?;
    ensure(stats.min_log_alpha.is_finite(), || "a step had zero acceptance probability".into())?;
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("TV={tv:.4}, acceptance={:.3}, min α={:.2e}", stats.acceptance_rate, stats.min_log_alpha.exp()))
}

fn random_positions(rng: &mut Rng) -> Vec<Point3> {
    (0..10).map(|_| Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect()
}

fn centroid(trajs: &[Vec<Point3>]) -> Vec<Point3> {
    (0..trajs[0].len()).map(|j| trajs.iter().map(|t| t[j]).sum::<Point3>() / trajs.len() as f64).collect()
}

fn rms(a: &[Point3], b: &[Point3]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

fn rwta_suite() -> Verdict {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let mut rng = Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut instances = 0;
    while instances < 100 {
        let m = rng.random_range(1..=4);
        let l = rng.random_range(1..=6);
        let labels = LabelSet { trajectories: (0..l).map(|_| random_positions(&mut rng)).collect(), costs: vec![0.0; l] };
        let hyps = HypothesisSet { trajectories: (0..m).map(|_| random_positions(&mut rng)).collect(), costs: vec![0.0; m] };
        let w = assignment_weights(&labels, &hyps, &cfg).map_err(|e| e.to_string())?;
        for row in &w {
            ensure((row.iter().sum::<f64>() - 1.0).abs() < 1e-12, || format!("weights {row:?} do not sum to 1"))?;
        }
        let (loss, grad) = rwta_loss(&labels, &hyps, &cfg).map_err(|e| e.to_string())?;
        let h = 1e-6;
        let mut flipped = false;
        'check: for k in 0..m {
            for j in 0..10 {
                for c in 0..3 {
                    let mut plus = hyps.clone();
                    plus.trajectories[k][j][c] += h;
                    let mut minus = hyps.clone();
                    minus.trajectories[k][j][c] -= h;
                    if assignment_weights(&labels, &plus, &cfg).unwrap() != w
                        || assignment_weights(&labels, &minus, &cfg).unwrap() != w
                    {
                        flipped = true;
                        break 'check;
                    }
                    let fd = (rwta_loss(&labels, &plus, &cfg).unwrap().0 - rwta_loss(&labels, &minus, &cfg).unwrap().0)
                        / (2.0 * h);
                    let g = grad[k][j][c];
                    let rel = (fd - g).abs() / g.abs().max(1.0);
                    worst = worst.max(rel);
                    ensure(rel <= 1e-5, || format!("gradient mismatch: fd {fd} vs {g}"))?;
                }
            }
        }
        if flipped {
            continue;
        }
        if m == 1 {
            let plain: f64 = labels
                .trajectories
                .iter()
                .map(|t| t.iter().zip(&hyps.trajectories[0]).map(|(a, b)| (a - b).norm_squared()).sum::<f64>())
                .sum();
            ensure((loss - plain).abs() <= 1e-9 * plain.max(1.0), || format!("M=1 loss {loss} vs {plain}"))?;
        }
        instances += 1;
    }

    let spread = 1.0;
    let labels = bimodal_labels(20, spread, 0.05, 3).map_err(|e| e.to_string())?;
    let upper = centroid(&labels.trajectories[..20]);
    let lower = centroid(&labels.trajectories[20..]);
    let all = centroid(&labels.trajectories);
    let fit = FitConfig::default();
    let three = fit_hypotheses(&labels, 3, &cfg, &fit).map_err(|e| e.to_string())?;
    let nearest = |target: &[Point3]| {
        three.hypotheses.trajectories.iter().map(|h| rms(h, target)).fold(f64::INFINITY, f64::min)
    };
    let (du, dl) = (nearest(&upper), nearest(&lower));
    ensure(du <= 0.1 * spread && dl <= 0.1 * spread, || format!("M=3 misses a cluster: {du:.3}, {dl:.3}"))?;
    let one = fit_hypotheses(&labels, 1, &cfg, &fit).map_err(|e| e.to_string())?;
    let dm = rms(&one.hypotheses.trajectories[0], &all);
    ensure(dm <= 0.1 * spread, || format!("M=1 is {dm:.3} m from the global mean"))?;
    within_budget(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("100 instances, worst FD rel. error {worst:.1e}; M=3 centroid error {:.3}/{:.3} m, M=1 mean error {dm:.3} m", du, dl))
}

fn projection_objective(q: &QuinticTrajectory, traj: &DiscreteTrajectory) -> f64 {
    traj.samples().iter().map(|s| (q.position(s.t) - s.position).norm_squared()).sum()
}

/// Substitutes the start constraints and solves the remaining
/// least-squares problem in (a3, a4, a5) per axis by SVD.
fn reference_objective(traj: &DiscreteTrajectory, init: &InitialState) -> f64 {
    let times: Vec<f64> = traj.times().collect();
    let a = DMatrix::from_fn(times.len(), 3, |i, j| times[i].powi(j as i32 + 3));
    let svd = a.clone().svd(true, true);
    (0..3)
        .map(|k| {
            let y = DVector::from_fn(times.len(), |i, _| {
                let t = times[i];
                traj.samples()[i].position[k]
                    - (init.position[k] + init.velocity[k] * t + 0.5 * init.acceleration[k] * t * t)
            });
            let x = svd.solve(&y, 1e-14).expect("SVD solve");
            (&a * x - y).norm_squared()
        })
        .sum()
}

fn projection_suite() -> Verdict {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(8);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let mut v = || Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let init = InitialState::new(v(), v(), v());
        let drift = v();
        let positions = (1..=10).map(|i| init.position + drift * (0.3 * i as f64) + v() * 0.5).collect();
        let traj = DiscreteTrajectory::from_positions(positions).map_err(|e| e.to_string())?;
        let q = project_quintic(&traj, &init).map_err(|e| e.to_string())?;
        let (p, vel, acc) = q.eval(0.0);
        let err = (p - init.position).amax().max((vel - init.velocity).amax()).max((acc - init.acceleration).amax());
        ensure(err <= 1e-9, || format!("start constraint violated by {err:e}"))?;
        let gap = projection_objective(&q, &traj) - reference_objective(&traj, &init);
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 1e-6, || format!("objective exceeds the reference minimizer by {gap:e}"))?;
        let resampled = DiscreteTrajectory::from_positions(traj.times().map(|t| q.position(t)).collect())
            .map_err(|e| e.to_string())?;
        let again = project_quintic(&resampled, &init).map_err(|e| e.to_string())?;
        let drift = q.axes.iter().flatten().zip(again.axes.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(drift <= 1e-8, || format!("round trip moved a coefficient by {drift:e}"))?;
    }
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("1000 instances, worst objective gap {worst_gap:.1e}"))
}

fn check_label(scenario: &Scenario, label: &ExpertLabel, cfg: &ExpertConfig) -> Result<(), String> {
    ensure(!label.is_empty(), || "empty label".into())?;
    ensure(label.costs.windows(2).all(|w| w[0] <= w[1]), || format!("costs not sorted: {:?}", label.costs))?;
    let init = scenario.start;
    for (traj, spline) in label.trajectories.iter().zip(&label.splines) {
        ensure(!in_collision(&scenario.cloud, &cfg.collision, traj), || "label sample in collision".into())?;
        let steps = (spline.duration() / 0.01).round() as usize;
        for i in 0..=steps {
            let (p, _, _) = spline.eval(i as f64 * 0.01).map_err(|e| e.to_string())?;
            ensure(!cfg.collision.point_in_collision(&scenario.cloud, &p), || "label spline in collision".into())?;
        }
        let (p, v, a) = spline.eval(0.0).map_err(|e| e.to_string())?;
        let err = (p - init.position).norm().max((v - init.velocity).norm()).max((a - init.acceleration).norm());
        ensure(err <= 1e-9, || format!("label does not start at the current state ({err:e})"))?;
    }
    Ok(())
}

fn expert_labels() -> Verdict {
    let start = Instant::now();
    let cfg = ExpertConfig::default();
    let mut labelled = 0;
    for seed in 0..20 {
        let scenario = gen_forest(&ForestSpec { seed, ..Default::default() }).map_err(|e| e.to_string())?;
        let l = label(&scenario, &ExpertConfig { seed, ..cfg.clone() }, true).map_err(|e| format!("forest {seed}: {e}"))?;
        check_label(&scenario, &l, &cfg).map_err(|e| format!("forest {seed}: {e}"))?;
        labelled += l.len();
    }
    let pole = PoleSpec::default();
    let scenario = gen_pole(&pole).map_err(|e| e.to_string())?;
    let mut both = 0;
    for seed in 0..10 {
        let l = label(&scenario, &ExpertConfig { seed, ..cfg.clone() }, false).map_err(|e| e.to_string())?;
        check_label(&scenario, &l, &cfg).map_err(|e| format!("pole {seed}: {e}"))?;
        let sides: Vec<f64> = l
            .trajectories
            .iter()
            .map(|t| {
                let s = t.samples().iter().find(|s| s.position.x >= pole.distance).unwrap_or(t.last());
                s.position.y.signum()
            })
            .collect();
        if sides.contains(&1.0) && sides.contains(&-1.0) {
            both += 1;
        }
    }
    ensure(both >= 8, || format!("labels on both sides of the pole in only {both}/10 seeds"))?;
    within_budget(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("20 forests ({labelled} trajectories) valid; pole labels on both sides in {both}/10 seeds"))
}

fn speed_sweep() -> Verdict {
    let start = Instant::now();
    let env = Environment::Forest { density: 1.0 / 25.0 };
    let speeds = vec![3.0, 5.0, 7.0, 10.0];
    let run = |policy: Policy| {
        let cfg = RunConfig {
            speeds: speeds.clone(),
            seeds: 10,
            master_seed: 0,
            rollout: RolloutConfig { policy, ..Default::default() },
        };
        sweep(&env, &cfg).map_err(|e| e.to_string())
    };
    let expert = run(Policy::Expert)?;
    let blind = run(Policy::Blind)?;
    let rates = |r: &mhplan_core::harness::RunReport| speeds.iter().map(|&v| r.success_rate(v).unwrap()).collect::<Vec<_>>();
    let (e, b) = (rates(&expert), rates(&blind));
    let summary = format!("expert {e:?}, blind {b:?} at {speeds:?} m/s");
    ensure(e[0] == 1.0, || format!("expert below 100% at 3 m/s; {summary}"))?;
    ensure(e.windows(2).all(|w| w[1] <= w[0]), || format!("expert success increases with speed; {summary}"))?;
    ensure(b.iter().all(|&r| r <= 0.5), || format!("blind above 50%; {summary}"))?;
    within_budget(start.elapsed(), Duration::from_secs(1800))?;
    Ok(summary)
}

fn global_ablation() -> Verdict {
    let start = Instant::now();
    let cfg = ExpertConfig::default();
    let (mut with, mut without) = (0.0, 0.0);
    for seed in 0..10 {
        let spec = GapWallSpec { seed, ..Default::default() };
        let gap = gap_geometry(&spec).map_err(|e| e.to_string())?;
        let scenario = gen_gap_wall(&spec).map_err(|e| e.to_string())?;
        let lateral = |use_global: bool| -> Result<f64, String> {
            let l = label(&scenario, &ExpertConfig { seed, ..cfg.clone() }, use_global).map_err(|e| e.to_string())?;
            let d: f64 = l.trajectories.iter().map(|t| (t.last().position.y - gap.gap_center).abs()).sum();
            Ok(d / l.len() as f64)
        };
        with += lateral(true)? / 10.0;
        without += lateral(false)? / 10.0;
    }
    ensure(with < without, || format!("global {with:.3} m vs local {without:.3} m"))?;
    within_budget(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("mean |y(1 s) − gap| global {with:.3} m < local {without:.3} m"))
}

fn mhplan(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mhplan"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("mhplan {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn read_all(dir: &Path, names: &[&str]) -> Result<Vec<Vec<u8>>, String> {
    names.iter().map(|n| std::fs::read(dir.join(n)).map_err(|e| format!("{n}: {e}"))).collect()
}

fn determinism() -> Verdict {
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = tmp.path();
        let mut run = Vec::new();
        mhplan(d, &["gen-env", "--kind", "forest", "--seed", "1", "--out", "forest"])?;
        run.extend(read_all(d, &["forest/scenario.json", "forest/cloud.xyz", "forest/reference.csv"])?);
        mhplan(d, &["plan", "--scenario", "forest/scenario.json", "--samples", "5000", "--seed", "3", "--out", "label.json"])?;
        run.extend(read_all(d, &["label.json"])?);
        mhplan(d, &["bench", "--speeds", "3,7", "--seeds", "2", "--samples", "1500", "--seed", "4", "--out", "report.json"])?;
        run.extend(read_all(d, &["report.json", "report.csv"])?);
        run.push(mhplan(d, &["feasibility", "--t-p", "10.3ms"])?);
        mhplan(d, &["fit-rwta", "--modes", "3", "--steps", "200", "--seed", "5", "--out", "fit.json"])?;
        mhplan(d, &["fit-rwta", "--labels", "label.json", "--modes", "2", "--steps", "50", "--out", "fit_label.json"])?;
        run.extend(read_all(d, &["fit.json", "fit_label.json"])?);
        outputs.push(run);
    }
    let names = ["scenario", "cloud", "reference", "label", "report", "report csv", "feasibility", "fit", "fit from label"];
    for (i, name) in names.iter().enumerate() {
        ensure(outputs[0][i] == outputs[1][i], || format!("{name} output differs between runs"))?;
    }
    Ok("gen-env, plan, bench, feasibility and fit-rwta outputs identical across two runs".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("feasibility golden table", feasibility_golden),
        ("collision-cost contract", collision_cost_contract),
        ("M-H correctness", mh_correctness),
        ("R-WTA property suite", rwta_suite),
        ("projection suite", projection_suite),
        ("expert label validity", expert_labels),
        ("desk-scale speed sweep", speed_sweep),
        ("global-plan ablation", global_ablation),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {name:<26} [{secs:7.2}s]  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<26} [{secs:7.2}s]  {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
