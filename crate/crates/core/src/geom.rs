//! Planar geometry and angle helpers shared by every module.

use std::f64::consts::{PI, TAU};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Absolute wrapped difference between two bearings, in [0, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Bearing of `v` measured counter-clockwise from +x.
pub fn bearing(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

pub fn unit(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

/// Distance from `p` to the segment `a`-`b` and the clamped projection parameter in [0, 1].
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + ab * t - p).norm(), t)
}
