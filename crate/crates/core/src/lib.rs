//! # mhplan
//!
//! Offline "privileged expert" planning for agile quadrotor flight.
//!
//! The crate samples distributions of collision-free trajectories against a
//! point cloud with Metropolis-Hastings over cubic B-spline control points,
//! projects trajectories onto per-axis quintic polynomials, evaluates the
//! relaxed winner-takes-all multi-hypothesis loss, generates randomized
//! forest / shape / narrow-gap worlds and rolls the planner out in a
//! receding-horizon harness. A small analytic model of the maximum avoidable
//! speed under sensing, processing and rotational latency is included.
//!
//! ## Modules
//! - [`geometry`]: point clouds, exact nearest-obstacle queries, collision cost
//! - [`trajectory`]: B-splines, discrete trajectories, quintic projection
//! - [`environment`]: procedural scenarios
//! - [`expert`]: trajectory cost, M-H sampler, global plan, labels
//! - [`multimodal`]: R-WTA loss, hypothesis fitting, execution selection
//! - [`feasibility`]: latency / maximum-speed model
//! - [`harness`]: receding-horizon rollouts and speed sweeps

pub mod environment;
pub mod error;
pub mod expert;
pub mod feasibility;
pub mod geometry;
pub mod harness;
pub mod multimodal;
pub mod trajectory;

pub use environment::Scenario;
pub use error::{Error, Result};
pub use geometry::{CollisionModel, Point3, PointCloud, Vec3};
pub use trajectory::{
    CubicBSpline, DiscreteTrajectory, InitialState, QuinticTrajectory, Sample, SAMPLE_DT,
};

/// Seeded RNG used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
