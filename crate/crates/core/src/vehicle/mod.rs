//! Ground-truth vehicle: kinematic bicycle model, path following and sensor emission.

mod control;
mod sensors;

pub use control::{advance_path, PATH_CAPTURE_M, follow_path, project, ControllerGains, PathFollower, PathProjection};
pub use sensors::{sample_slip, sense, SensorReadings, WheelSlip};

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};

/// Below this steering magnitude the arc equations switch to their straight-line limit.
pub const STRAIGHT_EPS: f64 = 1e-6;

/// Rear-axle pose and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        VehicleState { x, y, theta: wrap_angle(theta), v }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub accel: f64,
    pub steer: f64,
}

impl ControlCommand {
    pub fn saturate(self, p: &VehicleParams) -> Self {
        ControlCommand {
            accel: self.accel.clamp(-p.accel_max, p.accel_max),
            steer: self.steer.clamp(-p.steer_max, p.steer_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase_m: f64,
    pub dt_s: f64,
    pub steer_max: f64,
    pub accel_max: f64,
    pub v_cruise: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase_m: 2.85,
            dt_s: 0.1,
            steer_max: 0.55,
            accel_max: 3.0,
            v_cruise: 10.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.wheelbase_m > 0.0 && self.dt_s > 0.0 && self.steer_max > 0.0 && self.accel_max > 0.0 && self.v_cruise > 0.0) {
            return Err(crate::Error::config("vehicle parameters must be positive"));
        }
        Ok(())
    }
}

/// One line of the trajectory trace: true state after the step, the command and the readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTraceRecord {
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub accel: f64,
    pub steer: f64,
    pub odo_m: f64,
    pub compass: Option<f64>,
}

impl VehicleTraceRecord {
    pub fn new(step: u64, s: &VehicleState, u: ControlCommand, r: &SensorReadings) -> Self {
        VehicleTraceRecord {
            step,
            x: s.x,
            y: s.y,
            theta: s.theta,
            v: s.v,
            accel: u.accel,
            steer: u.steer,
            odo_m: r.odo_distance,
            compass: r.compass,
        }
    }
}

/// Distance covered in one step under constant acceleration.
pub fn step_distance(v: f64, accel: f64, dt: f64) -> f64 {
    0.5 * accel * dt * dt + v * dt
}

/// Body-frame displacement `(dx, dy, dtheta)` of an arc of length `d` at steering angle `steer`.
pub fn arc_displacement(d: f64, steer: f64, wheelbase: f64) -> (f64, f64, f64) {
    if steer.abs() < STRAIGHT_EPS {
        (d, d * d * steer / (2.0 * wheelbase), d * steer / wheelbase)
    } else {
        let rho = wheelbase / steer;
        let dtheta = d / rho;
        (rho * dtheta.sin(), rho * (1.0 - dtheta.cos()), dtheta)
    }
}

/// One step of the four-state kinematic bicycle model.
pub fn step_bicycle(s: &VehicleState, u: ControlCommand, p: &VehicleParams) -> VehicleState {
    let u = u.saturate(p);
    let d = step_distance(s.v, u.accel, p.dt_s);
    let (dx, dy, dtheta) = arc_displacement(d, u.steer, p.wheelbase_m);
    let (sin, cos) = s.theta.sin_cos();
    VehicleState {
        x: s.x + dx * cos - dy * sin,
        y: s.y + dx * sin + dy * cos,
        theta: wrap_angle(s.theta + dtheta),
        v: s.v + u.accel * p.dt_s,
    }
}
