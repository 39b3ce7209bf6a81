//! Steering and speed PID path following.
//!
//! Steering acts on the bearing error toward a lookahead point on the polyline; speed tracks
//! the cruise speed, reduced ahead of sharp vertices so turns are taken slowly. `path[0]` is
//! always the last vertex passed; callers drop passed vertices with [`advance_path`].

use serde::{Deserialize, Serialize};

use super::{ControlCommand, VehicleParams, VehicleState};
use crate::geom::{angle_diff, bearing, point_segment_distance, wrap_angle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub steer_kp: f64,
    pub steer_ki: f64,
    pub steer_kd: f64,
    pub speed_kp: f64,
    pub speed_ki: f64,
    pub lookahead_min_m: f64,
    /// Lookahead grows with speed: `max(lookahead_min_m, lookahead_time_s * v)`.
    pub lookahead_time_s: f64,
    /// Vertices turning more than this are treated as corners.
    pub corner_angle: f64,
    pub turn_speed: f64,
    pub reversal_speed: f64,
    /// Planned deceleration when approaching a corner.
    pub corner_decel: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            steer_kp: 1.0,
            steer_ki: 0.05,
            steer_kd: 0.05,
            speed_kp: 1.2,
            speed_ki: 0.05,
            lookahead_min_m: 4.0,
            lookahead_time_s: 0.6,
            corner_angle: 0.5,
            turn_speed: 5.0,
            reversal_speed: 3.0,
            corner_decel: 1.5,
        }
    }
}

/// Stateful PID path follower. One instance per vehicle.
#[derive(Debug, Clone)]
pub struct PathFollower {
    pub gains: ControllerGains,
    steer_int: f64,
    speed_int: f64,
    prev_alpha: Option<f64>,
}

const INTEGRAL_LIMIT: f64 = 2.0;

/// Where the vehicle sits relative to a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection {
    pub segment: usize,
    pub t: f64,
    pub distance: f64,
    /// Signed cross-track error, positive when the vehicle is left of the path.
    pub cross_track: f64,
}

/// Projection onto the current segment, `path[0]` to `path[1]`.
pub fn project(path: &[Vec2], p: Vec2) -> Option<PathProjection> {
    let (a, b) = (*path.first()?, *path.get(1)?);
    let (d, t) = point_segment_distance(p, a, b);
    let dir = b - a;
    let rel = p - a;
    let side = dir.x * rel.y - dir.y * rel.x;
    Some(PathProjection {
        segment: 0,
        t,
        distance: d,
        cross_track: if side >= 0.0 { d } else { -d },
    })
}

/// Default distance at which a vertex counts as reached.
pub const PATH_CAPTURE_M: f64 = 1.5;

/// Drops vertices the vehicle has passed: the current segment is finished once the projection
/// reaches its end or the vehicle comes within `capture_m` of its end vertex.
pub fn advance_path(path: &mut Vec<Vec2>, pos: Vec2, capture_m: f64) -> usize {
    let mut popped = 0;
    while path.len() >= 3 {
        let (_, t) = point_segment_distance(pos, path[0], path[1]);
        if t >= 1.0 || (pos - path[1]).norm() < capture_m {
            path.remove(0);
            popped += 1;
        } else {
            break;
        }
    }
    popped
}

fn point_ahead(path: &[Vec2], proj: &PathProjection, mut dist: f64) -> Vec2 {
    let mut k = proj.segment;
    let mut from = path[k] + (path[k + 1] - path[k]) * proj.t;
    loop {
        let to = path[k + 1];
        let len = (to - from).norm();
        if dist <= len || k + 2 >= path.len() {
            let dir = path[k + 1] - path[k];
            let n = dir.norm();
            if n == 0.0 {
                return to;
            }
            return from + dir / n * dist;
        }
        dist -= len;
        from = to;
        k += 1;
    }
}

impl PathFollower {
    pub fn new(gains: ControllerGains) -> Self {
        PathFollower { gains, steer_int: 0.0, speed_int: 0.0, prev_alpha: None }
    }

    pub fn reset(&mut self) {
        self.steer_int = 0.0;
        self.speed_int = 0.0;
        self.prev_alpha = None;
    }

    /// Speed limit imposed by the next corner (or the path end) ahead of the projection.
    fn speed_limit(&self, path: &[Vec2], proj: &PathProjection, p: &VehicleParams) -> f64 {
        let g = &self.gains;
        let k = proj.segment;
        let mut dist = (path[k + 1] - path[k]).norm() * (1.0 - proj.t);
        for j in k + 1..path.len() {
            if j + 1 == path.len() {
                return (2.0 * g.corner_decel * dist).sqrt().min(p.v_cruise);
            }
            let turn = angle_diff(bearing(path[j + 1] - path[j]), bearing(path[j] - path[j - 1]));
            if turn > g.corner_angle {
                let corner_v = if turn > 2.5 { g.reversal_speed } else { g.turn_speed };
                return (corner_v * corner_v + 2.0 * g.corner_decel * dist).sqrt().min(p.v_cruise);
            }
            dist += (path[j + 1] - path[j]).norm();
            if dist > 200.0 {
                break;
            }
        }
        p.v_cruise
    }

    pub fn command(&mut self, s: &VehicleState, path: &[Vec2], p: &VehicleParams) -> ControlCommand {
        let g = self.gains;
        let pos = s.pos();
        let (target, v_target) = match path.len() {
            0 => return ControlCommand::default(),
            1 => (path[0], (2.0 * g.corner_decel * (path[0] - pos).norm()).sqrt().min(p.v_cruise)),
            _ => {
                let proj = project(path, pos).expect("path has a segment");
                let look = g.lookahead_min_m.max(g.lookahead_time_s * s.v);
                (point_ahead(path, &proj, look), self.speed_limit(path, &proj, p))
            }
        };

        let dt = p.dt_s;
        let alpha = wrap_angle(bearing(target - pos) - s.theta);
        self.steer_int = (self.steer_int + alpha * dt).clamp(-INTEGRAL_LIMIT, INTEGRAL_LIMIT);
        let d_alpha = self.prev_alpha.map_or(0.0, |prev| wrap_angle(alpha - prev) / dt);
        self.prev_alpha = Some(alpha);
        // Proportional term in pure-pursuit form: the arc through the target point.
        let reach = (target - pos).norm().max(1e-3);
        let pursuit = (2.0 * p.wheelbase_m * alpha.sin() / reach).atan();
        let steer = g.steer_kp * pursuit + g.steer_ki * self.steer_int + g.steer_kd * d_alpha;

        let v_err = v_target - s.v;
        self.speed_int = (self.speed_int + v_err * dt).clamp(-INTEGRAL_LIMIT, INTEGRAL_LIMIT);
        let accel = (g.speed_kp * v_err + g.speed_ki * self.speed_int).max(-s.v / dt);

        ControlCommand { accel, steer }.saturate(p)
    }
}

/// Single-shot command from a fresh controller, for callers without controller state.
pub fn follow_path(s: &VehicleState, path: &[Vec2], p: &VehicleParams, gains: ControllerGains) -> ControlCommand {
    PathFollower::new(gains).command(s, path, p)
}
