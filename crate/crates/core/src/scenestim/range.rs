//! Distance to the intersection: height-to-distance calibration and a scalar static filter.

use serde::{Deserialize, Serialize};

use super::SegmentClass;

/// Scalar estimate of the distance from the rear axle to the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBelief {
    pub x: f64,
    pub var: f64,
    /// Odometry noise variance per prediction, m².
    pub q: f64,
    /// Measurement noise variance, m².
    pub r: f64,
}

/// The intersection is static: it closes in by the distance driven.
pub fn kf1d_predict(rb: &RangeBelief, dt: f64) -> RangeBelief {
    RangeBelief { x: rb.x - dt, var: rb.var + rb.q, ..*rb }
}

pub fn kf1d_update(rb: &RangeBelief, z: f64) -> RangeBelief {
    let k = rb.var / (rb.var + rb.r);
    RangeBelief { x: rb.x + k * (z - rb.x), var: rb.var - k * rb.var, ..*rb }
}

/// `d = a / h + b` over the calibrated height range, with residual standard deviation `sigma_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCalib {
    pub a: f64,
    pub b: f64,
    pub sigma_m: f64,
    pub h_min_px: f64,
    pub h_max_px: f64,
}

impl ClassCalib {
    pub fn distance(&self, h_px: f64) -> Option<f64> {
        (h_px >= self.h_min_px && h_px <= self.h_max_px).then(|| self.a / h_px + self.b)
    }

    /// Height that maps back to distance `d`, if it falls inside the calibrated range.
    pub fn height_for(&self, d: f64) -> Option<f64> {
        let h = self.a / (d - self.b);
        (d > self.b && h >= self.h_min_px && h <= self.h_max_px).then_some(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibCurve {
    pub stop_sign: ClassCalib,
    pub traffic_light: ClassCalib,
}

impl Default for CalibCurve {
    fn default() -> Self {
        CalibCurve {
            stop_sign: ClassCalib { a: 525.0, b: 1.5, sigma_m: 1.7, h_min_px: 5.0, h_max_px: 400.0 },
            traffic_light: ClassCalib { a: 700.0, b: 1.5, sigma_m: 5.9, h_min_px: 5.0, h_max_px: 400.0 },
        }
    }
}

impl CalibCurve {
    pub fn class(&self, class: SegmentClass) -> Option<&ClassCalib> {
        match class {
            SegmentClass::StopSign => Some(&self.stop_sign),
            SegmentClass::TrafficLight => Some(&self.traffic_light),
            SegmentClass::Car => None,
        }
    }

    /// Distance and its standard deviation, or `None` when the class is not calibrated or the
    /// height lies outside the calibrated range.
    pub fn distance_from_height(&self, class: SegmentClass, h_px: f64) -> Option<(f64, f64)> {
        let c = self.class(class)?;
        c.distance(h_px).map(|d| (d, c.sigma_m))
    }
}

/// Least-squares fit of `d = a / h + b` to `(h_px, d_m)` samples.
pub fn fit_inverse_height(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return None;
    }
    let mx = samples.iter().map(|s| 1.0 / s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (1.0 / s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (1.0 / s.0 - mx) * (s.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}
