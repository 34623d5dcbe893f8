use nalgebra::{Matrix3, Vector3};

use super::{DiscreteTrajectory, InitialState, Sample, SAMPLE_DT};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point3, Vec3};

/// Uniform cubic B-spline with three free control points.
///
/// The control polygon has six points: three anchors derived from the
/// initial state so that position, velocity and acceleration at `t = 0`
/// match it exactly, followed by the three sampled control points. Knots are
/// uniform, `t_k = (k - 3) h` with `h = duration / 3`, so the curve has three
/// spans and interior knots at `duration / 3` and `2 duration / 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBSpline {
    polygon: [Point3; 6],
    duration: f64,
}

/// Uniform cubic basis and its first two derivatives at local parameter `u`.
#[inline]
fn basis(u: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let u2 = u * u;
    let u3 = u2 * u;
    let w = 1.0 - u;
    (
        [
            w * w * w / 6.0,
            (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u3 / 6.0,
        ],
        [-0.5 * w * w, 1.5 * u2 - 2.0 * u, -1.5 * u2 + u + 0.5, 0.5 * u2],
        [w, 3.0 * u - 2.0, -3.0 * u + 1.0, u],
    )
}

impl CubicBSpline {
    /// Spline through the free `control_points`, anchored at `init`.
    pub fn anchored(init: &InitialState, control_points: [Point3; 3], duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("spline duration must be positive, got {duration}")));
        }
        let [a0, a1, a2] = anchors(init, duration / 3.0);
        let [c0, c1, c2] = control_points;
        Ok(Self { polygon: [a0, a1, a2, c0, c1, c2], duration })
    }

    pub fn from_polygon(polygon: [Point3; 6], duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("spline duration must be positive, got {duration}")));
        }
        Ok(Self { polygon, duration })
    }

    /// Least-squares fit of the free control points to the positions of
    /// `target`, keeping the anchors fixed by `init`.
    pub fn fit(init: &InitialState, target: &DiscreteTrajectory, duration: f64) -> Result<Self> {
        let mut spline = Self::anchored(init, [init.position; 3], duration)?;
        let mut normal = Matrix3::<f64>::zeros();
        let mut rhs = Matrix3::<f64>::zeros();
        for s in target.samples() {
            if s.t < 0.0 || s.t > duration + 1e-12 {
                return Err(Error::OutOfDomain { t: s.t, duration });
            }
            let (span, u) = spline.locate(s.t);
            let (w, _, _) = basis(u);
            let mut free = Vector3::zeros();
            let mut fixed = Vec3::zeros();
            for (m, wm) in w.iter().enumerate() {
                let k = span + m;
                if k < 3 {
                    fixed += spline.polygon[k] * *wm;
                } else {
                    free[k - 3] = *wm;
                }
            }
            normal += free * free.transpose();
            rhs += free * (s.position - fixed).transpose();
        }
        let chol = normal
            .cholesky()
            .ok_or_else(|| Error::RankDeficient("too few samples to fit the control points".into()))?;
        let sol = chol.solve(&rhs);
        for k in 0..3 {
            spline.polygon[3 + k] = sol.row(k).transpose();
        }
        Ok(spline)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn knot_spacing(&self) -> f64 {
        self.duration / 3.0
    }

    /// Full knot vector `t_0..t_9`; the valid domain is `[t_3, t_6]`.
    pub fn knots(&self) -> [f64; 10] {
        let h = self.knot_spacing();
        std::array::from_fn(|k| (k as f64 - 3.0) * h)
    }

    pub fn polygon(&self) -> &[Point3; 6] {
        &self.polygon
    }

    pub fn control_points(&self) -> [Point3; 3] {
        [self.polygon[3], self.polygon[4], self.polygon[5]]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.knot_spacing();
        let x = (t / h).clamp(0.0, 3.0);
        let span = (x.floor() as usize).min(2);
        (span, x - span as f64)
    }

    /// Position, velocity and acceleration at `t ∈ [0, duration]`.
    pub fn eval(&self, t: f64) -> Result<(Point3, Vec3, Vec3)> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::OutOfDomain { t, duration: self.duration });
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> (Point3, Vec3, Vec3) {
        let h = self.knot_spacing();
        let (span, u) = self.locate(t);
        let (b, d1, d2) = basis(u);
        let mut p = Point3::zeros();
        let mut v = Vec3::zeros();
        let mut a = Vec3::zeros();
        for m in 0..4 {
            let q = &self.polygon[span + m];
            p += q * b[m];
            v += q * d1[m];
            a += q * d2[m];
        }
        (p, v / h, a / (h * h))
    }

    /// Position only; used on the sampler hot path.
    #[inline]
    pub(crate) fn position_unchecked(&self, t: f64) -> Point3 {
        let (span, u) = self.locate(t);
        let (b, _, _) = basis(u);
        (0..4).fold(Point3::zeros(), |acc, m| acc + self.polygon[span + m] * b[m])
    }
}

/// Phantom control points that reproduce `init` at the start of the first span.
fn anchors(init: &InitialState, h: f64) -> [Point3; 3] {
    let (p, v, a) = (init.position, init.velocity, init.acceleration);
    let mid = p - a * (h * h / 6.0);
    let before = mid - (v * h - a * (h * h / 2.0));
    let after = mid + v * h + a * (h * h / 2.0);
    [before, mid, after]
}

/// Sample `spline` every 0.1 s at `t_i = i / 10`, `i = 1..=duration/0.1`,
/// with velocity and acceleration.
pub fn discretize(spline: &CubicBSpline) -> DiscreteTrajectory {
    let n = (spline.duration / SAMPLE_DT).round().max(1.0) as usize;
    let samples = (1..=n)
        .map(|i| {
            let t = (i as f64 * SAMPLE_DT).min(spline.duration);
            let (p, v, a) = spline.eval_unchecked(t);
            Sample::with_derivatives(t, p, v, a)
        })
        .collect();
    DiscreteTrajectory::new(samples).expect("spline samples are finite and ordered")
}
