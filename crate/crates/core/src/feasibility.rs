//! Maximum speed at which a quadrotor can still dodge a vertical pole, given
//! sensing range, sensing and processing latency, and the time it needs to
//! roll into the avoidance maneuver.
//!
//! The maneuver is modelled as pure rolling to an angle `φ` at maximum torque
//! followed by pure lateral acceleration at full thrust. Lateral acceleration
//! that already happens during the roll is ignored, so the bound is
//! conservative.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Moment of inertia about the roll axis, kg·m².
    pub inertia: f64,
    /// Maximum roll torque, N·m.
    pub max_torque: f64,
    /// Maximum mass-normalized collective thrust, m/s².
    pub max_thrust: f64,
    /// Combined obstacle and vehicle radius, m.
    pub obstacle_radius: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { inertia: 0.007, max_torque: 1.02, max_thrust: 35.3, obstacle_radius: 0.95 }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.inertia, self.max_torque, self.max_thrust, self.obstacle_radius];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(invalid(format!("vehicle parameters must be strictly positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingParams {
    /// Sensing range, m.
    pub range: f64,
    /// Sensing latency, s.
    pub sensing_latency: f64,
    /// Processing latency of the navigation method, s.
    pub processing_latency: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self { range: 6.0, sensing_latency: 0.066, processing_latency: 0.0103 }
    }
}

impl SensingParams {
    pub fn with_processing_latency(t_p: f64) -> Self {
        Self { processing_latency: t_p, ..Self::default() }
    }

    pub fn validate(&self, vehicle: &VehicleParams) -> Result<()> {
        let lat = [self.sensing_latency, self.processing_latency];
        if !lat.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(invalid("latencies must be non-negative"));
        }
        if !(self.range > vehicle.obstacle_radius && self.range.is_finite()) {
            return Err(invalid("sensing range must exceed the combined obstacle radius"));
        }
        Ok(())
    }
}

fn check_angle(phi: f64) -> Result<()> {
    if phi > 0.0 && phi <= FRAC_PI_2 + 1e-12 {
        Ok(())
    } else {
        Err(invalid(format!("roll angle must lie in (0, π/2], got {phi}")))
    }
}

/// Time to rotate to roll angle `phi` at maximum torque: `sqrt(2 φ J / T_max)`.
pub fn rot_latency(vehicle: &VehicleParams, phi: f64) -> Result<f64> {
    check_angle(phi)?;
    Ok((2.0 * phi * vehicle.inertia / vehicle.max_torque).sqrt())
}

/// Largest forward speed that still clears the obstacle when rolling to `phi`:
/// `s / (t_s + t_p + t_rot(φ) + sqrt(2 r_obs / (sin φ · c_max)))`.
pub fn max_speed(vehicle: &VehicleParams, sensing: &SensingParams, phi: f64) -> Result<f64> {
    let t_rot = rot_latency(vehicle, phi)?;
    let t_lat = (2.0 * vehicle.obstacle_radius / (phi.sin() * vehicle.max_thrust)).sqrt();
    Ok(sensing.range / (sensing.sensing_latency + sensing.processing_latency + t_rot + t_lat))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBound {
    /// Optimal roll angle, rad.
    pub phi: f64,
    /// Rotation latency at the optimal angle, s.
    pub t_rot: f64,
    /// Maximum speed, m/s.
    pub v_max: f64,
}

/// Default grid step for [`optimize_phi`]: 0.1°.
pub const DEFAULT_GRID_STEP: f64 = 0.1 * std::f64::consts::PI / 180.0;

/// Grid search over `φ ∈ (0, π/2]`; ties keep the smaller angle.
pub fn optimize_phi(vehicle: &VehicleParams, sensing: &SensingParams, grid_step: f64) -> Result<SpeedBound> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(invalid(format!("grid step must be positive, got {grid_step}")));
    }
    vehicle.validate()?;
    sensing.validate(vehicle)?;
    let n = (FRAC_PI_2 / grid_step).floor() as usize;
    let mut grid: Vec<f64> = (1..=n).map(|k| k as f64 * grid_step).collect();
    if grid.last().is_none_or(|&g| FRAC_PI_2 - g > 1e-12) {
        grid.push(FRAC_PI_2);
    }
    let mut best: Option<(f64, f64)> = None;
    for phi in grid {
        let v = max_speed(vehicle, sensing, phi)?;
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((phi, v));
        }
    }
    let (phi, v_max) = best.expect("grid is non-empty");
    Ok(SpeedBound { phi, t_rot: rot_latency(vehicle, phi)?, v_max })
}
