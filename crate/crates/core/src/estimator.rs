//! Pose EKF over `[x, y, θ]`.
//!
//! Odometry drives the prediction along the same arc geometry as the vehicle model, a compass
//! measures heading directly, and recognized landmarks act as direct position observations.
//! The vehicle counts as lost once the full major axis of the 2σ position ellipse exceeds a
//! threshold.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, RowVector3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::citygen::{Landmark, LandmarkSet};
use crate::geom::{wrap_angle, Vec2};
use crate::{Error, Result};

pub const DEFAULT_LOST_THRESHOLD_M: f64 = 100.0;
pub const LANDMARK_GATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Two-standard-deviation compass error in radians; `None` disables the compass.
    pub compass_2sigma: Option<f64>,
    /// Compass output rate; readings arrive on the nearest whole number of simulation steps.
    pub compass_rate_hz: f64,
    /// `None` disables encoder quantization.
    pub encoder_counts_per_rev: Option<u32>,
    pub wheel_radius_m: f64,
    /// Per-wheel slip standard deviation as a fraction of distance, at one meter of travel.
    pub slip_sigma: f64,
    pub track_width_m: f64,
    pub landmark_fix_sigma_m: f64,
    /// Heading random-walk variance added on every prediction, rad².
    pub heading_floor_var: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            compass_2sigma: Some(30f64.to_radians()),
            compass_rate_hz: 5.0,
            encoder_counts_per_rev: Some(4096),
            wheel_radius_m: 0.35,
            slip_sigma: 0.0112,
            track_width_m: 1.6,
            landmark_fix_sigma_m: 5.0,
            heading_floor_var: 0.1f64.to_radians().powi(2),
        }
    }
}

impl NoiseConfig {
    /// Slip variance is `slip_sigma² · d · SLIP_REFERENCE_M` per wheel.
    pub const SLIP_REFERENCE_M: f64 = 1.0;

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.slip_sigma, self.heading_floor_var];
        if nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("noise magnitudes must be nonnegative"));
        }
        if let Some(c) = self.compass_2sigma {
            if !(c >= 0.0 && c < PI) {
                return Err(Error::config("compass 2-sigma must lie in [0, π)"));
            }
        }
        if !(self.compass_rate_hz > 0.0) {
            return Err(Error::config("compass rate must be positive"));
        }
        if self.encoder_counts_per_rev == Some(0) {
            return Err(Error::config("encoder counts per revolution must be positive"));
        }
        if !(self.wheel_radius_m > 0.0 && self.track_width_m > 0.0 && self.landmark_fix_sigma_m > 0.0) {
            return Err(Error::config("wheel radius, track width and landmark fix sigma must be positive"));
        }
        Ok(())
    }

    pub fn encoder_tick_m(&self) -> Option<f64> {
        self.encoder_counts_per_rev
            .map(|n| 2.0 * PI * self.wheel_radius_m / n as f64)
    }

    /// Odometer variance for one reading covering `d` meters.
    pub fn odo_var(&self, d: f64) -> f64 {
        let quant = self.encoder_tick_m().map_or(0.0, |t| t * t / 12.0);
        0.5 * self.slip_sigma.powi(2) * d.max(0.0) * Self::SLIP_REFERENCE_M + quant
    }

    /// Heading variance injected by differential slip over `d` meters.
    pub fn yaw_var(&self, d: f64) -> f64 {
        2.0 * self.slip_sigma.powi(2) * d.max(0.0) * Self::SLIP_REFERENCE_M / self.track_width_m.powi(2)
    }

    pub fn compass_sigma(&self) -> Option<f64> {
        self.compass_2sigma.map(|c| c / 2.0)
    }

    /// Steps between compass readings at simulation step `dt_s`.
    pub fn compass_period_steps(&self, dt_s: f64) -> u64 {
        ((1.0 / (self.compass_rate_hz * dt_s)).round() as u64).max(1)
    }

    /// Copy with the compass switched off, for steps without a reading.
    pub fn without_compass(&self) -> NoiseConfig {
        NoiseConfig { compass_2sigma: None, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseBelief {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl PoseBelief {
    pub fn new(x: f64, y: f64, theta: f64, cov: Matrix3<f64>) -> Self {
        PoseBelief { mean: Vector3::new(x, y, wrap_angle(theta)), cov }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.mean.x, self.mean.y)
    }

    pub fn theta(&self) -> f64 {
        self.mean.z
    }

    pub fn position_cov(&self) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFix {
    pub landmark: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub sigma_m: f64,
}

fn symmetrize(p: Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

/// Body-frame displacement along an arc of length `d` that turns by `dtheta`.
fn arc_terms(d: f64, dtheta: f64) -> (f64, f64) {
    if dtheta.abs() < 1e-6 {
        let t2 = dtheta * dtheta;
        (d * (1.0 - t2 / 6.0), 0.5 * d * dtheta * (1.0 - t2 / 12.0))
    } else {
        let rho = d / dtheta;
        (rho * dtheta.sin(), rho * (1.0 - dtheta.cos()))
    }
}

/// Dead-reckoning prediction over odometer distance `odo` with heading change `dtheta`
/// (the steering-implied rotation, zero when holding heading).
pub fn predict(b: &PoseBelief, odo: f64, dtheta: f64, noise: &NoiseConfig) -> PoseBelief {
    let d = odo.max(0.0);
    let th = b.mean.z;
    let (sin, cos) = th.sin_cos();
    let (sx, sy) = arc_terms(d, dtheta);
    let mean = Vector3::new(
        b.mean.x + sx * cos - sy * sin,
        b.mean.y + sx * sin + sy * cos,
        wrap_angle(th + dtheta),
    );

    let mut f = Matrix3::identity();
    f[(0, 2)] = -sx * sin - sy * cos;
    f[(1, 2)] = sx * cos - sy * sin;

    let curvature = if d > 0.0 { dtheta / d } else { 0.0 };
    let g = Vector3::new((th + dtheta).cos(), (th + dtheta).sin(), curvature);
    let mut q = g * g.transpose() * noise.odo_var(d);
    q[(2, 2)] += noise.yaw_var(d) + noise.heading_floor_var;

    PoseBelief { mean, cov: symmetrize(f * b.cov * f.transpose() + q) }
}

/// Compass innovation `z - θ̂`, wrapped to (-π, π].
pub fn compass_innovation(theta_hat: f64, z: f64) -> f64 {
    wrap_angle(z - theta_hat)
}

/// Scalar heading update with measurement standard deviation `sigma`.
pub fn update_compass(b: &PoseBelief, z: f64, sigma: f64) -> PoseBelief {
    let r = sigma * sigma;
    let s = b.cov[(2, 2)] + r;
    if s <= 0.0 {
        return *b;
    }
    let k: Vector3<f64> = b.cov.column(2) / s;
    let nu = compass_innovation(b.mean.z, z);
    let mut mean = b.mean + k * nu;
    mean.z = wrap_angle(mean.z);
    let h = RowVector3::new(0.0, 0.0, 1.0);
    let a = Matrix3::identity() - k * h;
    let cov = a * b.cov * a.transpose() + k * k.transpose() * r;
    PoseBelief { mean, cov: symmetrize(cov) }
}

/// Squared Mahalanobis distance of `offset` under the symmetric 2×2 covariance `p`.
/// Offsets along zero-variance directions are infinitely far unless they vanish.
pub fn mahalanobis_sq(p: &Matrix2<f64>, offset: Vector2<f64>) -> f64 {
    let (a, b, c) = (p[(0, 0)], p[(0, 1)], p[(1, 1)]);
    let det = a * c - b * b;
    let scale = (a + c).abs().max(f64::MIN_POSITIVE);
    if det > 1e-12 * scale * scale {
        return (c * offset.x * offset.x - 2.0 * b * offset.x * offset.y + a * offset.y * offset.y) / det;
    }
    let eig = p.symmetric_eigen();
    let mut m2 = 0.0;
    for i in 0..2 {
        let proj = eig.eigenvectors.column(i).dot(&offset);
        let lambda = eig.eigenvalues[i];
        if lambda > 1e-12 * scale {
            m2 += proj * proj / lambda;
        } else if proj.abs() > 1e-9 {
            return f64::INFINITY;
        }
    }
    m2
}

/// Direct position observation of the vehicle at the landmark's map position.
pub fn update_landmark(b: &PoseBelief, fix: &LandmarkFix) -> Result<PoseBelief> {
    let r = fix.sigma_m * fix.sigma_m;
    let s = b.position_cov() + Matrix2::identity() * r;
    let nu = Vector2::new(fix.x_m - b.mean.x, fix.y_m - b.mean.y);
    let m = mahalanobis_sq(&s, nu).sqrt();
    if m > LANDMARK_GATE {
        return Err(Error::FixRejected { distance: m, gate: LANDMARK_GATE });
    }
    let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
    let pht: Matrix3x2<f64> = b.cov.fixed_view::<3, 2>(0, 0).into_owned();
    let k = pht * s_inv;
    let mut mean = b.mean + k * nu;
    mean.z = wrap_angle(mean.z);
    let h = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let a = Matrix3::identity() - k * h;
    let cov = a * b.cov * a.transpose() + k * k.transpose() * r;
    Ok(PoseBelief { mean, cov: symmetrize(cov) })
}

/// Full major-axis length of the 2σ position ellipse, `4·sqrt(λ_max)`.
pub fn ellipse_major_axis(b: &PoseBelief) -> f64 {
    let (a, off, c) = (b.cov[(0, 0)], b.cov[(0, 1)], b.cov[(1, 1)]);
    let half_diff = 0.5 * (a - c);
    let lambda = 0.5 * (a + c) + (half_diff * half_diff + off * off).sqrt();
    4.0 * lambda.max(0.0).sqrt()
}

pub fn is_lost(b: &PoseBelief, threshold_m: f64) -> bool {
    ellipse_major_axis(b) > threshold_m
}

/// Landmarks inside the 2σ position ellipse (boundary inclusive).
pub fn gate_landmarks<'a>(b: &PoseBelief, lms: &'a LandmarkSet) -> Vec<&'a Landmark> {
    let p = b.position_cov();
    lms.entries
        .iter()
        .filter(|l| landmark_in_gate(b, &p, l.pos))
        .collect()
}

fn landmark_in_gate(b: &PoseBelief, p: &Matrix2<f64>, pos: Vec2) -> bool {
    mahalanobis_sq(p, pos - b.pos()) <= LANDMARK_GATE * LANDMARK_GATE
}

/// Gate test for a single landmark position.
pub fn in_gate(b: &PoseBelief, pos: Vec2) -> bool {
    landmark_in_gate(b, &b.position_cov(), pos)
}

/// One line of the belief trace.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BeliefTraceRecord {
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Upper triangle, row-major: xx, xy, xθ, yy, yθ, θθ.
    pub cov: [f64; 6],
    pub major_axis_m: f64,
    pub lost: bool,
}

impl BeliefTraceRecord {
    pub fn new(step: u64, b: &PoseBelief, threshold_m: f64) -> Self {
        let c = &b.cov;
        BeliefTraceRecord {
            step,
            x: b.mean.x,
            y: b.mean.y,
            theta: b.mean.z,
            cov: [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]],
            major_axis_m: ellipse_major_axis(b),
            lost: is_lost(b, threshold_m),
        }
    }
}
