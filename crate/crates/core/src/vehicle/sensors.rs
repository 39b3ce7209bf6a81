//! Odometry and compass emission.
//!
//! Wheel slip is modelled per rear wheel: each wheel's ground travel deviates from its encoder
//! count by a zero-mean Gaussian whose variance grows linearly with distance. The mean of the two
//! errors corrupts the odometer; their difference over the track width turns the body.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::VehicleState;
use crate::estimator::NoiseConfig;
use crate::geom::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReadings {
    pub odo_distance: f64,
    /// `None` when the vehicle carries no compass.
    pub compass: Option<f64>,
}

/// Ground-truth effect of one step of wheel slip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelSlip {
    /// Ground distance minus encoder distance, averaged over both wheels.
    pub distance_err: f64,
    /// Extra body rotation caused by unequal slip.
    pub yaw_err: f64,
}

/// Draws the slip of one step of length `d`.
pub fn sample_slip<R: Rng + ?Sized>(d: f64, noise: &NoiseConfig, rng: &mut R) -> WheelSlip {
    if noise.slip_sigma == 0.0 || d <= 0.0 {
        return WheelSlip::default();
    }
    let sd = noise.slip_sigma * (d * NoiseConfig::SLIP_REFERENCE_M).sqrt();
    let left: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    let right: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    WheelSlip {
        distance_err: 0.5 * (left + right),
        yaw_err: (right - left) / noise.track_width_m,
    }
}

/// Readings for the step from `s_prev` to `s` covering true arc length `arc` with the given slip.
///
/// The encoder reports the arc minus the slip, quantized to whole ticks: the reading error
/// from quantization is uniform over half a tick either way.
pub fn sense<R: Rng + ?Sized>(
    _s_prev: &VehicleState,
    s: &VehicleState,
    arc: f64,
    slip: WheelSlip,
    noise: &NoiseConfig,
    rng: &mut R,
) -> SensorReadings {
    let mut odo = arc - slip.distance_err;
    if let Some(tick) = noise.encoder_tick_m() {
        odo += rng.random_range(-0.5..=0.5) * tick;
    }
    let compass = noise.compass_2sigma.map(|two_sigma| {
        if two_sigma > 0.0 {
            let n = Normal::new(0.0, two_sigma / 2.0).expect("finite sigma");
            wrap_angle(s.theta + n.sample(rng))
        } else {
            s.theta
        }
    });
    SensorReadings { odo_distance: odo.max(0.0), compass }
}
