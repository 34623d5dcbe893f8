use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Vec3};

/// One control point in spherical coordinates: range, azimuth and elevation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spherical {
    pub r: f64,
    /// Azimuth in `(-π, π]`, measured from the heading direction.
    pub theta: f64,
    /// Elevation in `[-π/2, π/2]`.
    pub phi: f64,
}

impl Spherical {
    /// Map onto `r ≥ 0`, `θ ∈ (-π, π]`, `φ ∈ [-π/2, π/2]` without moving the
    /// Cartesian point.
    pub fn canonical(self) -> Self {
        let (mut r, mut theta, mut phi) = (self.r, self.theta, self.phi);
        if r < 0.0 {
            r = -r;
            theta += PI;
            phi = -phi;
        }
        phi = wrap(phi);
        if phi > FRAC_PI_2 {
            phi = PI - phi;
            theta += PI;
        } else if phi < -FRAC_PI_2 {
            phi = -PI - phi;
            theta += PI;
        }
        Self { r, theta: wrap(theta), phi }
    }

    /// Offset in the local frame (x along the heading, z up-ish).
    pub fn to_local(self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(self.r * cp * ct, self.r * cp * st, self.r * sp)
    }

    pub fn from_local(v: &Vec3) -> Self {
        let r = v.norm();
        if r == 0.0 {
            return Self { r: 0.0, theta: 0.0, phi: 0.0 };
        }
        Self { r, theta: v.y.atan2(v.x), phi: (v.z / r).clamp(-1.0, 1.0).asin() }.canonical()
    }
}

/// Wrap an angle into `(-π, π]`.
fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Local frame at the current position: columns are heading, left, up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingFrame {
    pub origin: Point3,
    pub rotation: Matrix3<f64>,
}

impl HeadingFrame {
    /// Frame with x along `heading`; falls back to +x for a zero heading.
    pub fn new(origin: Point3, heading: &Vec3) -> Self {
        let x = if heading.norm() > 1e-9 { heading.normalize() } else { Vec3::x() };
        let mut y = Vec3::z().cross(&x);
        if y.norm() < 1e-9 {
            y = Vec3::y();
        }
        let y = y.normalize();
        let z = x.cross(&y);
        Self { origin, rotation: Matrix3::from_columns(&[x, y, z]) }
    }

    pub fn to_world(&self, s: &Spherical) -> Point3 {
        self.origin + self.rotation * s.to_local()
    }

    pub fn to_spherical(&self, p: &Point3) -> Spherical {
        Spherical::from_local(&(self.rotation.transpose() * (p - self.origin)))
    }
}

/// The three free B-spline control points of one expert sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalControlPoints(pub [Spherical; 3]);

impl SphericalControlPoints {
    pub fn to_vec(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (k, s) in self.0.iter().enumerate() {
            out[3 * k] = s.r;
            out[3 * k + 1] = s.theta;
            out[3 * k + 2] = s.phi;
        }
        out
    }

    pub fn from_slice(x: &[f64]) -> Self {
        assert_eq!(x.len(), 9, "three spherical control points expected");
        Self(std::array::from_fn(|k| Spherical { r: x[3 * k], theta: x[3 * k + 1], phi: x[3 * k + 2] }))
    }

    pub fn canonical(&self) -> Self {
        Self(self.0.map(Spherical::canonical))
    }

    pub fn to_world(&self, frame: &HeadingFrame) -> [Point3; 3] {
        self.0.map(|s| frame.to_world(&s))
    }

    pub fn from_world(frame: &HeadingFrame, points: &[Point3; 3]) -> Self {
        Self(points.map(|p| frame.to_spherical(&p)))
    }
}

/// Canonicalize a flat 9-vector in place.
pub(crate) fn canonicalize_slice(x: &mut [f64]) {
    let c = SphericalControlPoints::from_slice(x).canonical().to_vec();
    x.copy_from_slice(&c);
}
