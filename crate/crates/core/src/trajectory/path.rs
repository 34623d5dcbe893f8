use super::{DiscreteTrajectory, Sample, HORIZON_SAMPLES, SAMPLE_DT};
use crate::error::{invalid, Result};
use crate::geometry::{Point3, Vec3};

/// Arc-length parametrized polyline used to cut time-local reference windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    points: Vec<Point3>,
    cumulative: Vec<f64>,
}

impl ReferencePath {
    pub fn from_points(points: impl IntoIterator<Item = Point3>) -> Result<Self> {
        let mut pts: Vec<Point3> = Vec::new();
        for p in points {
            if pts.last().is_none_or(|q| (p - q).norm() > 1e-9) {
                pts.push(p);
            }
        }
        if pts.is_empty() {
            return Err(invalid("reference path needs at least one point"));
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        cumulative.push(0.0);
        for w in pts.windows(2) {
            s += (w[1] - w[0]).norm();
            cumulative.push(s);
        }
        Ok(Self { points: pts, cumulative })
    }

    pub fn from_trajectory(traj: &DiscreteTrajectory) -> Result<Self> {
        Self::from_points(traj.positions().copied())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn start(&self) -> Point3 {
        self.points[0]
    }

    pub fn end(&self) -> Point3 {
        *self.points.last().expect("non-empty")
    }

    fn segment(&self, s: f64) -> usize {
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len().saturating_sub(2)),
            Err(i) => i.saturating_sub(1).min(self.points.len().saturating_sub(2)),
        }
    }

    /// Point at arc length `s`, clamped to the path.
    pub fn point_at(&self, s: f64) -> Point3 {
        if self.points.len() == 1 {
            return self.points[0];
        }
        let s = s.clamp(0.0, self.length());
        let i = self.segment(s);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let u = if len > 0.0 { (s - self.cumulative[i]) / len } else { 0.0 };
        self.points[i] + (self.points[i + 1] - self.points[i]) * u
    }

    /// Unit tangent at arc length `s` (zero for a single-point path).
    pub fn tangent_at(&self, s: f64) -> Vec3 {
        if self.points.len() == 1 {
            return Vec3::zeros();
        }
        let i = self.segment(s.clamp(0.0, self.length()));
        (self.points[i + 1] - self.points[i]).normalize()
    }

    /// Arc length of the point on the path closest to `p`, restricted to
    /// `[lo, hi]` when a search interval is given.
    pub fn project(&self, p: &Point3, range: Option<(f64, f64)>) -> f64 {
        if self.points.len() == 1 {
            return 0.0;
        }
        let (lo, hi) = range.unwrap_or((0.0, self.length()));
        let (lo, hi) = (lo.max(0.0), hi.min(self.length()));
        let mut best = (f64::INFINITY, lo);
        for i in 0..self.points.len() - 1 {
            let (s0, s1) = (self.cumulative[i], self.cumulative[i + 1]);
            if s1 < lo || s0 > hi {
                continue;
            }
            let (a, b) = (self.points[i], self.points[i + 1]);
            let ab = b - a;
            let len2 = ab.norm_squared();
            let u = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let s = (s0 + u * (s1 - s0)).clamp(lo, hi);
            let d = (self.point_at(s) - p).norm_squared();
            if d < best.0 {
                best = (d, s);
            }
        }
        best.1
    }

    /// Horizon window starting at arc length `s0` and advancing at `speed`:
    /// samples at `t_i = i / 10`, `i = 1..=10`.
    pub fn window(&self, s0: f64, speed: f64) -> DiscreteTrajectory {
        self.window_over(s0, speed, HORIZON_SAMPLES)
    }

    /// Like [`window`](Self::window) with `samples` points instead of ten.
    /// Beyond the end the path is continued along its final tangent.
    pub fn window_over(&self, s0: f64, speed: f64, samples: usize) -> DiscreteTrajectory {
        let samples = (1..=samples.max(1))
            .map(|i| {
                let t = i as f64 * SAMPLE_DT;
                let s = s0 + speed * t;
                let tangent = self.tangent_at(s);
                let beyond = (s - self.length()).max(0.0);
                Sample::with_derivatives(t, self.point_at(s) + tangent * beyond, tangent * speed, Vec3::zeros())
            })
            .collect();
        DiscreteTrajectory::new(samples).expect("window samples are ordered")
    }

    /// Resample at constant `speed` every 0.1 s from the start to the end.
    pub fn resample(&self, speed: f64) -> Result<DiscreteTrajectory> {
        if !(speed > 0.0) {
            return Err(invalid("resampling speed must be positive"));
        }
        let steps = (self.length() / (speed * SAMPLE_DT)).ceil() as usize;
        let samples = (0..=steps)
            .map(|i| {
                let t = i as f64 * SAMPLE_DT;
                let s = (speed * t).min(self.length());
                let v = if s < self.length() { self.tangent_at(s) * speed } else { Vec3::zeros() };
                Sample::with_derivatives(t, self.point_at(s), v, Vec3::zeros())
            })
            .collect();
        DiscreteTrajectory::new(samples)
    }
}
