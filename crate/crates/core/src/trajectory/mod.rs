//! Trajectory representations: the expert's anchored cubic B-spline, time
//! sampled trajectories and per-axis quintic polynomials.

mod bspline;
mod path;
mod quintic;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point3, Vec3};

pub use bspline::{discretize, CubicBSpline};
pub use path::ReferencePath;
pub use quintic::{
    project_quintic, project_quintic_kkt, project_time_scaled, snap_cost, time_scale,
    KktSolution, QuinticTrajectory,
};

/// Sample spacing of every discrete trajectory in the planner, seconds.
pub const SAMPLE_DT: f64 = 0.1;
/// Expert / network horizon, seconds.
pub const HORIZON: f64 = 1.0;
/// Samples in one horizon (`t_i = i / 10`, `i = 1..=10`).
pub const HORIZON_SAMPLES: usize = 10;

/// Full translational state used to anchor trajectories at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub position: Point3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl InitialState {
    pub fn at_rest(position: Point3) -> Self {
        Self { position, velocity: Vec3::zeros(), acceleration: Vec3::zeros() }
    }

    pub fn new(position: Point3, velocity: Vec3, acceleration: Vec3) -> Self {
        Self { position, velocity, acceleration }
    }
}

/// One time-stamped state sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub position: Point3,
    pub velocity: Option<Vec3>,
    pub acceleration: Option<Vec3>,
}

impl Sample {
    pub fn at(t: f64, position: Point3) -> Self {
        Self { t, position, velocity: None, acceleration: None }
    }

    pub fn with_derivatives(t: f64, position: Point3, velocity: Vec3, acceleration: Vec3) -> Self {
        Self { t, position, velocity: Some(velocity), acceleration: Some(acceleration) }
    }
}

/// Time-stamped samples with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    samples: Vec<Sample>,
}

impl DiscreteTrajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("trajectory needs at least one sample"));
        }
        for s in &samples {
            let finite = s.t.is_finite()
                && s.position.iter().all(|c| c.is_finite())
                && s.velocity.is_none_or(|v| v.iter().all(|c| c.is_finite()))
                && s.acceleration.is_none_or(|a| a.iter().all(|c| c.is_finite()));
            if !finite {
                return Err(invalid(format!("non-finite sample at t={}", s.t)));
            }
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(invalid("sample times must be strictly increasing"));
        }
        Ok(Self { samples })
    }

    /// Positions at `t_i = (i + 1) * 0.1`, the network-trajectory layout.
    pub fn from_positions(positions: Vec<Point3>) -> Result<Self> {
        Self::new(
            positions
                .into_iter()
                .enumerate()
                .map(|(i, p)| Sample::at((i + 1) as f64 * SAMPLE_DT, p))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = &Point3> + '_ {
        self.samples.iter().map(|s| &s.position)
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Time of the last sample.
    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    /// Whether consecutive samples are spaced by `dt` (to 1e-9 s).
    pub fn is_uniform(&self, dt: f64) -> bool {
        self.samples.windows(2).all(|w| ((w[1].t - w[0].t) - dt).abs() < 1e-9)
    }

    /// Whether the sample times coincide with `other`'s (to 1e-9 s).
    pub fn same_times(&self, other: &Self) -> bool {
        self.len() == other.len() && self.times().zip(other.times()).all(|(a, b)| (a - b).abs() < 1e-9)
    }

    /// Largest pointwise distance between two trajectories with equal sample count.
    pub fn max_pointwise_distance(&self, other: &Self) -> f64 {
        self.positions().zip(other.positions()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Polyline length through the sample positions.
    pub fn path_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].position - w[0].position).norm()).sum()
    }

    /// Same samples with every position shifted by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample { position: s.position + offset, ..*s })
            .collect();
        Self { samples }
    }

    fn has_derivatives(&self) -> bool {
        self.samples.iter().all(|s| s.velocity.is_some() && s.acceleration.is_some())
    }

    /// CSV with header `t,x,y,z` or `t,x,y,z,vx,vy,vz,ax,ay,az` when every
    /// sample carries derivatives.
    pub fn to_csv_string(&self) -> String {
        let full = self.has_derivatives();
        let mut out = String::from(if full { "t,x,y,z,vx,vy,vz,ax,ay,az\n" } else { "t,x,y,z\n" });
        for s in &self.samples {
            let p = s.position;
            let _ = write!(out, "{},{},{},{}", s.t, p.x, p.y, p.z);
            if let (true, Some(v), Some(a)) = (full, s.velocity, s.acceleration) {
                let _ = write!(out, ",{},{},{},{},{},{}", v.x, v.y, v.z, a.x, a.y, a.z);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| invalid("empty trajectory CSV"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let full = match cols.as_slice() {
            ["t", "x", "y", "z"] => false,
            ["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"] => true,
            _ => return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") }),
        };
        let mut samples = Vec::new();
        for (n, line) in lines {
            let vals = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse { line: n + 1, msg: format!("{v:?}: {e}") })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {} columns, found {}", cols.len(), vals.len()),
                });
            }
            let p = Point3::new(vals[1], vals[2], vals[3]);
            samples.push(if full {
                Sample::with_derivatives(
                    vals[0],
                    p,
                    Vec3::new(vals[4], vals[5], vals[6]),
                    Vec3::new(vals[7], vals[8], vals[9]),
                )
            } else {
                Sample::at(vals[0], p)
            });
        }
        Self::new(samples)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Straight-line trajectory from `start` along `direction` at constant
/// `speed`, sampled every 0.1 s from `t = 0` until `length` is covered.
pub fn straight_line(start: Point3, direction: Vec3, length: f64, speed: f64) -> Result<DiscreteTrajectory> {
    if !(length > 0.0 && speed > 0.0) || direction.norm() == 0.0 {
        return Err(invalid("straight line needs positive length, speed and a direction"));
    }
    let dir = direction.normalize();
    let steps = (length / (speed * SAMPLE_DT)).round() as usize;
    let samples = (0..=steps)
        .map(|i| {
            let t = i as f64 * SAMPLE_DT;
            let s = (speed * t).min(length);
            Sample::with_derivatives(t, start + dir * s, dir * speed, Vec3::zeros())
        })
        .collect();
    DiscreteTrajectory::new(samples)
}

/// Horizontal circle of `radius` around `center`, starting at angle 0 and
/// flown counter-clockwise at `speed` for `laps` revolutions.
pub fn circle(center: Point3, radius: f64, speed: f64, laps: f64) -> Result<DiscreteTrajectory> {
    if !(radius > 0.0 && speed > 0.0 && laps > 0.0) {
        return Err(invalid("circle needs positive radius, speed and lap count"));
    }
    let omega = speed / radius;
    let total = laps * 2.0 * std::f64::consts::PI / omega;
    let steps = (total / SAMPLE_DT).round() as usize;
    let samples = (0..=steps)
        .map(|i| {
            let t = i as f64 * SAMPLE_DT;
            let (s, c) = (omega * t).sin_cos();
            Sample::with_derivatives(
                t,
                center + Vec3::new(radius * c, radius * s, 0.0),
                Vec3::new(-speed * s, speed * c, 0.0),
                Vec3::new(-speed * omega * c, -speed * omega * s, 0.0),
            )
        })
        .collect();
    DiscreteTrajectory::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unordered_or_empty() {
        assert!(DiscreteTrajectory::new(vec![]).is_err());
        let a = Sample::at(0.2, Point3::zeros());
        let b = Sample::at(0.1, Point3::zeros());
        assert!(DiscreteTrajectory::new(vec![a, b]).is_err());
        assert!(DiscreteTrajectory::new(vec![a, a]).is_err());
    }

    #[test]
    fn csv_round_trip_both_layouts() {
        let line = straight_line(Point3::new(1.0, 2.0, 3.0), Vec3::x(), 2.0, 4.0).unwrap();
        let back = DiscreteTrajectory::from_csv_str(&line.to_csv_string()).unwrap();
        assert_eq!(back, line);
        assert!(line.to_csv_string().starts_with("t,x,y,z,vx,vy,vz,ax,ay,az\n"));

        let plain = DiscreteTrajectory::from_positions(vec![Point3::zeros(), Point3::x()]).unwrap();
        let text = plain.to_csv_string();
        assert!(text.starts_with("t,x,y,z\n"));
        assert_eq!(DiscreteTrajectory::from_csv_str(&text).unwrap(), plain);
        assert!(DiscreteTrajectory::from_csv_str("t,x\n0,1\n").is_err());
        assert!(DiscreteTrajectory::from_csv_str("t,x,y,z\n0,1,2\n").is_err());
    }

    #[test]
    fn straight_line_has_declared_length() {
        let line = straight_line(Point3::zeros(), Vec3::new(1.0, 1.0, 0.0), 40.0, 3.0).unwrap();
        assert!(line.is_uniform(SAMPLE_DT));
        assert!((line.path_length() - 40.0).abs() <= 3.0 * SAMPLE_DT);
        assert_eq!(line.first().t, 0.0);
    }

    #[test]
    fn circle_stays_on_radius() {
        let c = circle(Point3::new(0.0, 0.0, 2.0), 6.0, 3.0, 1.0).unwrap();
        assert!(c.is_uniform(SAMPLE_DT));
        for p in c.positions() {
            assert!(((p - Point3::new(0.0, 0.0, 2.0)).norm() - 6.0).abs() < 1e-9);
        }
    }
}
