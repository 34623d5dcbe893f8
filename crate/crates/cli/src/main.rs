use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mhplan_core::environment::{
    circle_scenario, gen_forest, gen_gap_wall, gen_pole, gen_shapes, ForestSpec, GapWallSpec, PoleSpec, Region,
    Scenario, ShapeFieldSpec,
};
use mhplan_core::expert::{self, ExpertConfig, ExpertLabel, ProposalSchedule};
use mhplan_core::feasibility::{optimize_phi, SensingParams, VehicleParams, DEFAULT_GRID_STEP};
use mhplan_core::harness::{sweep, Environment, NoiseModel, Policy, RolloutConfig, RunConfig};
use mhplan_core::multimodal::{bimodal_labels, fit_hypotheses, FitConfig, LabelSet, LossConfig};
use mhplan_core::{Error, Point3};

mod units;

use units::{parse_duration, parse_speed};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\ntarget: ",
    env!("MHPLAN_BUILD_TARGET"),
    "\nprofile: ",
    env!("MHPLAN_BUILD_PROFILE"),
);

/// Expert trajectory sampling, multi-hypothesis fitting and speed-bound
/// tools for agile quadrotor flight.
#[derive(Debug, Parser)]
#[command(name = "mhplan", version, long_version = LONG_VERSION)]
struct Cli {
    /// Seed for every random choice made by the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file, or output directory for `gen-env`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for `bench`; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scenario (cloud, reference and scenario JSON).
    GenEnv(GenEnvArgs),
    /// Label a scenario's start state with the sampling expert.
    Plan(PlanArgs),
    /// Roll a policy through a family of scenarios over several speeds.
    Bench(BenchArgs),
    /// Theoretical maximum avoidance speed for a processing latency.
    Feasibility(FeasibilityArgs),
    /// Fit hypotheses to a label set under the relaxed winner-takes-all loss.
    FitRwta(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Forest,
    Shapes,
    Gap,
    Pole,
    Circle,
}

#[derive(Debug, Args)]
struct GenEnvArgs {
    #[arg(long, value_enum)]
    kind: EnvKind,
    /// Obstacles per square meter (forest and shapes).
    #[arg(long)]
    density: Option<f64>,
    /// Gap width in meters; drawn at random when omitted.
    #[arg(long)]
    gap_width: Option<f64>,
    /// Lateral gap offset in meters; drawn at random when omitted.
    #[arg(long)]
    gap_offset: Option<f64>,
    /// Circle radius in meters.
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    /// Nominal speed along the reference, m/s.
    #[arg(long, default_value_t = 3.0)]
    speed: f64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    /// Proposal-variance switch interval; defaults to 16000 at 50000
    /// samples and to a third of the budget otherwise.
    #[arg(long)]
    switch_every: Option<usize>,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    /// Condition on the raw reference instead of the global plan.
    #[arg(long)]
    local: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchEnv {
    Forest,
    Shapes,
    Gap,
    Pole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Expert,
    ExpertLocal,
    Blind,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "forest")]
    env: BenchEnv,
    #[arg(long, default_value_t = 0.04)]
    density: f64,
    /// Comma-separated speeds, m/s.
    #[arg(long, value_delimiter = ',', value_parser = parse_speed, default_value = "3,5,7,10")]
    speeds: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, value_enum, default_value = "expert")]
    policy: PolicyArg,
    /// Proposals per replanning step.
    #[arg(long, default_value_t = 6000)]
    samples: usize,
    #[arg(long)]
    switch_every: Option<usize>,
    /// Replanning period, e.g. `100ms`.
    #[arg(long, value_parser = parse_duration, default_value = "100ms")]
    replan_period: f64,
    /// Perturb the perceived velocity and the collective thrust.
    #[arg(long)]
    noise: bool,
    /// Time budget as a multiple of the nominal traversal time.
    #[arg(long, default_value_t = 3.0)]
    timeout_factor: f64,
}

#[derive(Debug, Args)]
struct FeasibilityArgs {
    /// Processing latency, e.g. `10.3ms`.
    #[arg(long = "t-p", value_parser = parse_duration)]
    t_p: Option<f64>,
    /// JSON file with optional `vehicle` and `sensing` objects.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Grid step of the roll-angle search in degrees [default: 0.1].
    #[arg(long)]
    grid_step_deg: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Label JSON written by `plan`, or a label-set JSON with positions.
    /// A two-cluster label set is generated when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    modes: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    step_size: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Labels per cluster of the generated set.
    #[arg(long, default_value_t = 20)]
    per_cluster: usize,
    /// Half distance between the generated clusters, meters.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Per-sample noise of the generated labels, meters.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FeasibilityParams {
    vehicle: VehicleParams,
    sensing: SensingParams,
}

#[derive(Debug, Serialize)]
struct FeasibilityRow {
    t_p: f64,
    phi_deg: f64,
    t_rot: f64,
    v_max: f64,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    /// Bad flags, missing or malformed input files.
    Usage(String),
    /// The inputs were fine but the problem has no solution.
    Domain(Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::Blocked | Error::Diverged { .. } => Failure::Domain(e),
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

type CmdResult = Result<(), Failure>;

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn schedule_for(samples: usize, switch_every: Option<usize>) -> ProposalSchedule {
    let base = ProposalSchedule::default();
    let switch_every = switch_every.unwrap_or(if samples == 50_000 { base.switch_every } else { samples.div_ceil(3) });
    ProposalSchedule { switch_every: switch_every.max(1), ..base }
}

fn gen_env(cli: &Cli, a: &GenEnvArgs) -> CmdResult {
    let seed = cli.seed;
    let scenario = match a.kind {
        EnvKind::Forest => {
            let base = ForestSpec::default();
            let region = Region { intensity: a.density.unwrap_or(base.region.intensity), ..base.region };
            gen_forest(&ForestSpec { region, seed, ..base })?
        }
        EnvKind::Shapes => {
            let base = ShapeFieldSpec::default();
            let region = Region { intensity: a.density.unwrap_or(base.region.intensity), ..base.region };
            gen_shapes(&ShapeFieldSpec { region, seed, ..base })?
        }
        EnvKind::Gap => gen_gap_wall(&GapWallSpec {
            gap_width: a.gap_width,
            lateral_offset: a.gap_offset,
            seed,
            ..Default::default()
        })?,
        EnvKind::Pole => gen_pole(&PoleSpec::default())?,
        EnvKind::Circle => circle_scenario(Point3::new(0.0, 0.0, 2.0), a.radius, a.speed)?,
    };
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = scenario.save(&dir)?;
    println!("{}", path.display());
    Ok(())
}

fn plan(cli: &Cli, a: &PlanArgs) -> CmdResult {
    require_file(&a.scenario, "scenario")?;
    let scenario = Scenario::load(&a.scenario)?;
    let cfg = ExpertConfig {
        total_samples: a.samples,
        schedule: schedule_for(a.samples, a.switch_every),
        top_k: a.top_k,
        seed: cli.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let label = expert::label(&scenario, &cfg, !a.local)?;
    emit(cli.out.as_deref(), &label.to_json_string())
}

fn bench(cli: &Cli, a: &BenchArgs) -> CmdResult {
    let env = match a.env {
        BenchEnv::Forest => Environment::Forest { density: a.density },
        BenchEnv::Shapes => Environment::Shapes { density: a.density },
        BenchEnv::Gap => Environment::Gap,
        BenchEnv::Pole => Environment::Pole,
    };
    let policy = match a.policy {
        PolicyArg::Expert => Policy::Expert,
        PolicyArg::ExpertLocal => Policy::ExpertLocal,
        PolicyArg::Blind => Policy::Blind,
    };
    let expert = ExpertConfig {
        total_samples: a.samples,
        schedule: schedule_for(a.samples, a.switch_every),
        ..Default::default()
    };
    let cfg = RunConfig {
        speeds: a.speeds.clone(),
        seeds: a.seeds,
        master_seed: cli.seed,
        rollout: RolloutConfig {
            replan_period: a.replan_period,
            policy,
            noise: a.noise.then(NoiseModel::default),
            expert,
            timeout_factor: a.timeout_factor,
            ..Default::default()
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building the worker pool")?;
    let report = pool.install(|| sweep(&env, &cfg))?;
    match cli.out.as_deref() {
        Some(p) => {
            emit(Some(p), &report.to_json_string())?;
            emit(Some(&p.with_extension("csv")), &report.to_csv_string())?;
            for agg in &report.aggregate {
                println!("speed {:>5.1}  success {:>3}/{:<3} ({:.0}%)", agg.speed, agg.successes, agg.runs, 100.0 * agg.success_rate);
            }
            Ok(())
        }
        None => emit(None, &report.to_json_string()),
    }
}

fn feasibility(cli: &Cli, a: &FeasibilityArgs) -> CmdResult {
    let mut params = match &a.params {
        Some(p) => {
            require_file(p, "params")?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<FeasibilityParams>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => FeasibilityParams::default(),
    };
    if let Some(t_p) = a.t_p {
        params.sensing.processing_latency = t_p;
    }
    let step = a.grid_step_deg.map_or(DEFAULT_GRID_STEP, f64::to_radians);
    let bound = optimize_phi(&params.vehicle, &params.sensing, step)?;
    let row = FeasibilityRow {
        t_p: params.sensing.processing_latency,
        phi_deg: bound.phi.to_degrees(),
        t_rot: bound.t_rot,
        v_max: bound.v_max,
    };
    println!("{:>8} {:>8} {:>10} {:>11}", "t_p[ms]", "phi*[deg]", "t_rot[ms]", "v_max[m/s]");
    println!("{:>8.1} {:>9.1} {:>10.1} {:>11.2}", row.t_p * 1e3, row.phi_deg, row.t_rot * 1e3, row.v_max);
    if let Some(p) = cli.out.as_deref() {
        let text = serde_json::to_string_pretty(&row).context("serializing the result")?;
        emit(Some(p), &text)?;
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<LabelSet, Failure> {
    require_file(path, "labels")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(set) = serde_json::from_str::<LabelSet>(&text) {
        return Ok(set);
    }
    let (trajs, costs) = ExpertLabel::read_json(&text)?;
    Ok(LabelSet::from_trajectories(&trajs, costs)?)
}

fn fit_rwta(cli: &Cli, a: &FitArgs) -> CmdResult {
    let labels = match &a.labels {
        Some(p) => read_labels(p)?,
        None => bimodal_labels(a.per_cluster, a.spread, a.noise, cli.seed)?,
    };
    let loss = LossConfig { epsilon: a.epsilon, ..Default::default() };
    let fit = FitConfig { steps: a.steps, step_size: a.step_size, seed: cli.seed, ..Default::default() };
    let result = fit_hypotheses(&labels, a.modes, &loss, &fit)?;
    emit(cli.out.as_deref(), &result.to_json_string())
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::GenEnv(a) => gen_env(cli, a),
        Command::Plan(a) => plan(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Feasibility(a) => feasibility(cli, a),
        Command::FitRwta(a) => fit_rwta(cli, a),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", error_json("usage", &msg));
            eprintln!("see `mhplan --help`");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("{}", error_json("internal", &format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
