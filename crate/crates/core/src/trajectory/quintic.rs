use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::{DiscreteTrajectory, InitialState};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point3, Vec3};

/// Per-axis order-5 polynomials `μ(t) = Σ a_n tⁿ` with a time-scale factor.
///
/// `beta` rescales time on execution: the executed trajectory at real time
/// `t` is `μ(β t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuinticTrajectory {
    pub beta: f64,
    /// `axes[k] = [a0, …, a5]` for x, y, z.
    pub axes: [[f64; 6]; 3],
}

#[inline]
fn horner(c: &[f64; 6], t: f64) -> (f64, f64, f64) {
    let p = ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0];
    let v = (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1];
    let a = ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2];
    (p, v, a)
}

impl QuinticTrajectory {
    /// Unscaled position, velocity and acceleration of `μ` at parameter `t`.
    pub fn eval(&self, t: f64) -> (Point3, Vec3, Vec3) {
        let mut out = (Point3::zeros(), Vec3::zeros(), Vec3::zeros());
        for (k, c) in self.axes.iter().enumerate() {
            let (p, v, a) = horner(c, t);
            out.0[k] = p;
            out.1[k] = v;
            out.2[k] = a;
        }
        out
    }

    pub fn position(&self, t: f64) -> Point3 {
        self.eval(t).0
    }

    /// Executed state at real time `t`: `μ(βt)`, `β μ'(βt)`, `β² μ''(βt)`.
    pub fn eval_scaled(&self, t: f64) -> (Point3, Vec3, Vec3) {
        let (p, v, a) = self.eval(self.beta * t);
        (p, v * self.beta, a * (self.beta * self.beta))
    }

    /// `‖μ(1) − μ(0)‖`, the displacement over the unit interval.
    pub fn unit_displacement(&self) -> f64 {
        (self.position(1.0) - self.position(0.0)).norm()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite floats serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Projection result together with the Lagrange multipliers of the three
/// start constraints on each axis.
#[derive(Debug, Clone, Copy)]
pub struct KktSolution {
    pub trajectory: QuinticTrajectory,
    pub multipliers: [[f64; 3]; 3],
}

/// Least-squares fit of per-axis quintics to the sample positions of `traj`
/// subject to position, velocity and acceleration at `t = 0` equal to `init`.
pub fn project_quintic(traj: &DiscreteTrajectory, init: &InitialState) -> Result<QuinticTrajectory> {
    project_quintic_kkt(traj, init).map(|s| s.trajectory)
}

/// Same as [`project_quintic`], solved through the KKT system
/// `[2AᵀA Cᵀ; C 0] [a; λ] = [2Aᵀy; d]` per axis.
pub fn project_quintic_kkt(traj: &DiscreteTrajectory, init: &InitialState) -> Result<KktSolution> {
    let times: Vec<f64> = traj.times().collect();
    if times.iter().any(|&t| t <= 0.0) {
        return Err(invalid("projection samples must lie strictly after t = 0"));
    }

    // Normal matrix of the time basis, shared across axes.
    let mut gram = SMatrix::<f64, 6, 6>::zeros();
    let rows: Vec<SVector<f64, 6>> = times
        .iter()
        .map(|&t| SVector::<f64, 6>::from_fn(|n, _| t.powi(n as i32)))
        .collect();
    for r in &rows {
        gram += r * r.transpose();
    }
    // a0..a2 are pinned by the constraints; a3..a5 need a full-rank block.
    if gram.fixed_view::<3, 3>(3, 3).into_owned().cholesky().is_none() {
        return Err(Error::RankDeficient(format!(
            "{} samples cannot determine the free quintic coefficients",
            times.len()
        )));
    }

    let mut kkt = SMatrix::<f64, 9, 9>::zeros();
    kkt.fixed_view_mut::<6, 6>(0, 0).copy_from(&(gram * 2.0));
    let constraint = constraint_matrix();
    kkt.fixed_view_mut::<3, 6>(6, 0).copy_from(&constraint);
    kkt.fixed_view_mut::<6, 3>(0, 6).copy_from(&constraint.transpose());
    let lu = kkt.lu();

    let mut axes = [[0.0; 6]; 3];
    let mut multipliers = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut rhs = SVector::<f64, 9>::zeros();
        for (r, s) in rows.iter().zip(traj.samples()) {
            let y = s.position[k];
            for n in 0..6 {
                rhs[n] += 2.0 * r[n] * y;
            }
        }
        rhs[6] = init.position[k];
        rhs[7] = init.velocity[k];
        rhs[8] = init.acceleration[k];
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::RankDeficient("singular KKT system".into()))?;
        for n in 0..6 {
            axes[k][n] = sol[n];
        }
        for m in 0..3 {
            multipliers[k][m] = sol[6 + m];
        }
    }
    Ok(KktSolution { trajectory: QuinticTrajectory { beta: 1.0, axes }, multipliers })
}

/// Rows of `C` with `C a = [s(0), ṡ(0), s̈(0)]`.
pub(crate) fn constraint_matrix() -> SMatrix<f64, 3, 6> {
    let mut c = SMatrix::<f64, 3, 6>::zeros();
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    c[(2, 2)] = 2.0;
    c
}

/// Attach `β = v_des / ‖μ(1) − μ(0)‖` so that the executed average speed over
/// the scaled unit interval equals `v_des`.
pub fn time_scale(q: &QuinticTrajectory, v_des: f64) -> Result<QuinticTrajectory> {
    if !(v_des > 0.0 && v_des.is_finite()) {
        return Err(invalid(format!("desired speed must be positive, got {v_des}")));
    }
    let v_mu = q.unit_displacement();
    if v_mu <= 1e-12 {
        return Err(Error::DegenerateTrajectory);
    }
    Ok(QuinticTrajectory { beta: v_des / v_mu, ..*q })
}

/// Project and time-scale so that the executed trajectory, not only the
/// unscaled polynomial, continues `init`.
///
/// The start derivatives handed to the projection are divided by `β` and
/// `β²`; since `β` depends on the projected displacement, the pair is found
/// by fixed-point iteration.
pub fn project_time_scaled(
    traj: &DiscreteTrajectory,
    init: &InitialState,
    v_des: f64,
) -> Result<QuinticTrajectory> {
    let mut beta = 1.0;
    let mut q = project_quintic(traj, init)?;
    for _ in 0..100 {
        let scaled = time_scale(&q, v_des)?;
        let converged = (scaled.beta - beta).abs() <= 1e-12 * beta.max(1.0);
        beta = scaled.beta;
        let unscaled_init = InitialState {
            position: init.position,
            velocity: init.velocity / beta,
            acceleration: init.acceleration / (beta * beta),
        };
        q = project_quintic(traj, &unscaled_init)?;
        if converged {
            break;
        }
    }
    Ok(QuinticTrajectory { beta, ..q })
}

/// Integral of the squared snap of the unscaled polynomial over `[0, 1]`,
/// summed over axes. With `s⁽⁴⁾(t) = 24 a4 + 120 a5 t` the integral is
/// `576 a4² + 2880 a4 a5 + 4800 a5²`.
pub fn snap_cost(q: &QuinticTrajectory) -> f64 {
    q.axes
        .iter()
        .map(|c| 576.0 * c[4] * c[4] + 2880.0 * c[4] * c[5] + 4800.0 * c[5] * c[5])
        .sum()
}
