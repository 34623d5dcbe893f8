use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mhplan_bench::{expert_config, forest, projection_fixture, query_points, rwta_fixture, start_window};
use mhplan_core::expert::{global_plan, mh_label, trajectory_cost};
use mhplan_core::feasibility::{optimize_phi, SensingParams, VehicleParams, DEFAULT_GRID_STEP};
use mhplan_core::multimodal::{rwta_loss, LossConfig};
use mhplan_core::trajectory::{project_quintic, project_time_scaled};

fn nearest_queries(c: &mut Criterion) {
    let scenario = forest(0);
    let points = query_points(1000);
    c.bench_function("cloud/nearest_1000", |b| {
        b.iter(|| points.iter().map(|p| scenario.cloud.distance_or_inf(p)).sum::<f64>())
    });
}

fn expert(c: &mut Criterion) {
    let scenario = forest(0);
    let cfg = expert_config(5000);
    let window = start_window(&scenario, &cfg);
    c.bench_function("expert/trajectory_cost", |b| {
        b.iter(|| trajectory_cost(black_box(&window), &window, &scenario.cloud, &cfg).unwrap())
    });
    let mut group = c.benchmark_group("expert/label");
    group.sample_size(10);
    for samples in [5000, 50_000] {
        let cfg = expert_config(samples);
        group.bench_with_input(BenchmarkId::from_parameter(samples), &cfg, |b, cfg| {
            b.iter(|| mh_label(&window, &scenario.cloud, &scenario.start, cfg).unwrap())
        });
    }
    group.finish();
    let mut group = c.benchmark_group("expert/global_plan");
    group.sample_size(10);
    group.bench_function("forest", |b| b.iter(|| global_plan(&scenario, 0.25).unwrap()));
    group.finish();
}

fn projection(c: &mut Criterion) {
    let (traj, init) = projection_fixture();
    c.bench_function("quintic/project", |b| b.iter(|| project_quintic(black_box(&traj), &init).unwrap()));
    c.bench_function("quintic/project_time_scaled", |b| {
        b.iter(|| project_time_scaled(black_box(&traj), &init, 7.0).unwrap())
    });
}

fn multimodal(c: &mut Criterion) {
    let (labels, hyps) = rwta_fixture(50);
    let cfg = LossConfig::default();
    c.bench_function("rwta/loss_and_gradient_100x3", |b| b.iter(|| rwta_loss(&labels, black_box(&hyps), &cfg).unwrap()));
}

fn feasibility(c: &mut Criterion) {
    let vehicle = VehicleParams::default();
    let sensing = SensingParams::default();
    c.bench_function("feasibility/optimize_phi", |b| {
        b.iter(|| optimize_phi(&vehicle, black_box(&sensing), DEFAULT_GRID_STEP).unwrap())
    });
}

criterion_group!(benches, nearest_queries, expert, projection, multimodal, feasibility);
criterion_main!(benches);
