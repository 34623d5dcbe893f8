//! Point clouds, nearest-obstacle queries and the truncated-quadratic
//! collision cost.

mod kdtree;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::DiscreteTrajectory;
use kdtree::KdTree;

/// A position in meters.
pub type Point3 = Vector3<f64>;
/// A free 3-vector (velocity, acceleration, offsets).
pub type Vec3 = Vector3<f64>;

/// Obstacle points with an exact nearest-neighbour index.
///
/// Immutable after construction; cheap to share between threads.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Point3>,
    index: KdTree,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(invalid(format!("non-finite cloud point {p:?}")));
        }
        let index = KdTree::build(&points);
        Ok(Self { points, index })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new(), index: KdTree::build(&[]) }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `p` to the closest cloud point, `None` for an empty cloud.
    pub fn nearest_distance(&self, p: &Point3) -> Option<f64> {
        self.index.nearest_within(p, f64::INFINITY).map(|(_, d2)| d2.sqrt())
    }

    /// Index of the closest cloud point and its distance.
    pub fn nearest(&self, p: &Point3) -> Option<(usize, f64)> {
        self.index.nearest_within(p, f64::INFINITY).map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Distance to the closest point if it is strictly below `radius`.
    ///
    /// Much cheaper than [`nearest_distance`](Self::nearest_distance) when
    /// only the near field matters (collision cost, collision checks).
    pub fn nearest_within(&self, p: &Point3, radius: f64) -> Option<f64> {
        self.index.nearest_within(p, radius).map(|(_, d2)| d2.sqrt())
    }

    /// Distance with the empty-cloud case mapped to infinity.
    pub fn distance_or_inf(&self, p: &Point3) -> f64 {
        self.nearest_distance(p).unwrap_or(f64::INFINITY)
    }

    /// Axis-aligned bounds `(min, max)`, `None` when empty.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = self.points.first()?;
        Some(self.points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    /// Parse plain-text XYZ: one `x y z` triple per line, `#` comments.
    pub fn from_xyz_str(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: n + 1, msg };
            let vals = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 3 {
                return Err(parse_err(format!("expected 3 values, found {}", vals.len())));
            }
            points.push(Point3::new(vals[0], vals[1], vals[2]));
        }
        Self::new(points)
    }

    pub fn to_xyz_string(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 24);
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
        }
        out
    }

    /// Parse a JSON array of `[x, y, z]` triples.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: Vec<[f64; 3]> = serde_json::from_str(text)?;
        Self::new(raw.into_iter().map(Point3::from).collect())
    }

    pub fn to_json_string(&self) -> String {
        let raw: Vec<[f64; 3]> = self.points.iter().map(|p| [p.x, p.y, p.z]).collect();
        serde_json::to_string(&raw).expect("finite floats serialize")
    }

    /// Load a cloud, choosing the format from the extension (`.json` or XYZ).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_xyz_str(&text)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            self.to_json_string()
        } else {
            self.to_xyz_string()
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Sphere model of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionModel {
    /// Vehicle sphere radius in meters.
    pub radius: f64,
}

impl Default for CollisionModel {
    fn default() -> Self {
        Self { radius: 0.2 }
    }
}

impl CollisionModel {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("vehicle radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    /// Distance beyond which the collision cost vanishes (`2 r_q`).
    pub fn influence_distance(&self) -> f64 {
        2.0 * self.radius
    }

    /// Truncated quadratic cost of an obstacle at distance `d_c`:
    /// `4 - d_c²/r_q²` inside `2 r_q`, zero outside.
    pub fn collision_cost(&self, d_c: f64) -> Result<f64> {
        if d_c.is_nan() || d_c < 0.0 {
            return Err(invalid(format!("obstacle distance must be non-negative, got {d_c}")));
        }
        Ok(self.cost_unchecked(d_c))
    }

    #[inline]
    pub(crate) fn cost_unchecked(&self, d_c: f64) -> f64 {
        if d_c > 2.0 * self.radius {
            0.0
        } else {
            4.0 - (d_c * d_c) / (self.radius * self.radius)
        }
    }

    /// Collision cost at `p` against `cloud`; zero for an empty cloud.
    pub fn cost_at(&self, cloud: &PointCloud, p: &Point3) -> f64 {
        match cloud.nearest_within(p, self.influence_distance()) {
            Some(d) => self.cost_unchecked(d),
            None => 0.0,
        }
    }

    /// Whether `p` lies strictly closer than `r_q` to any cloud point.
    pub fn point_in_collision(&self, cloud: &PointCloud, p: &Point3) -> bool {
        cloud.nearest_within(p, self.radius).is_some()
    }
}

/// Sampled collision check: true iff any sample position is closer than `r_q`
/// to the cloud. Motion between samples is not swept.
pub fn in_collision(cloud: &PointCloud, model: &CollisionModel, traj: &DiscreteTrajectory) -> bool {
    traj.samples().iter().any(|s| model.point_in_collision(cloud, &s.position))
}
