//! Compass-based intersection decisions.
//!
//! At each intersection the vehicle picks the exit whose heading best matches the bearing to
//! its current target from one block beyond the intersection, plus a penalty that grows every
//! time the same decision is repeated at a remembered intersection. The target is the goal or
//! a landmark, depending on the strategy.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::citygen::{LandmarkSet, Link, RoadNetwork};
use crate::estimator::{ellipse_major_axis, PoseBelief};
use crate::geom::{angle_diff, bearing, point_segment_distance, unit, wrap_angle, Vec2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOption {
    pub index: usize,
    /// Heading of the vehicle after taking this exit.
    pub exit_bearing: f64,
    /// Bearing to the target from the predicted position one block along this exit.
    pub goal_bearing: f64,
    pub penalty: f64,
}

impl DecisionOption {
    pub fn cost(&self) -> f64 {
        angle_diff(self.exit_bearing, self.goal_bearing) + self.penalty
    }
}

/// Position of the lowest-cost option; ties go to the earliest option.
pub fn decide_intersection(options: &[DecisionOption]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in options.iter().enumerate() {
        let c = o.cost();
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoOptions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavigatorConfig {
    /// Penalty added per repeat of a decision, rad.
    pub penalty_step: f64,
    pub match_radius_m: f64,
    /// A target this close to an exit's road counts as reached along that exit.
    pub arrive_radius_m: f64,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        NavigatorConfig { penalty_step: FRAC_PI_2, match_radius_m: 30.0, arrive_radius_m: 25.0 }
    }
}

impl NavigatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_step >= 0.0 && self.match_radius_m > 0.0 && self.arrive_radius_m > 0.0) {
            return Err(Error::config("navigator radii must be positive and the penalty nonnegative"));
        }
        Ok(())
    }
}

/// Decisions are remembered by the compass octant of their exit bearing.
pub type DecisionKey = u8;

pub fn decision_key(exit_bearing: f64) -> DecisionKey {
    ((exit_bearing / FRAC_PI_4).round() as i64).rem_euclid(8) as u8
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Visit {
    pub pos: Vec2,
    pub counts: BTreeMap<DecisionKey, u32>,
}

impl Visit {
    pub fn count(&self, key: DecisionKey) -> u32 {
        self.counts.get(&key).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntersectionMemory {
    pub visits: Vec<Visit>,
}

impl IntersectionMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Nearest remembered intersection within `radius_m` of `est_pos`.
    pub fn match_intersection(&self, est_pos: Vec2, radius_m: f64) -> Option<usize> {
        self.visits
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v.pos - est_pos).norm()))
            .filter(|&(_, d)| d <= radius_m)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Counts `decision` at the matched intersection, or remembers a new one. Returns the
    /// visit's index.
    pub fn record_visit(&mut self, est_pos: Vec2, decision: DecisionKey, radius_m: f64) -> usize {
        let i = match self.match_intersection(est_pos, radius_m) {
            Some(i) => i,
            None => {
                self.visits.push(Visit { pos: est_pos, counts: BTreeMap::new() });
                self.visits.len() - 1
            }
        };
        *self.visits[i].counts.entry(decision).or_insert(0) += 1;
        i
    }

    pub fn penalty(&self, visit: Option<usize>, key: DecisionKey, step: f64) -> f64 {
        visit.map_or(0.0, |i| self.visits[i].count(key) as f64 * step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    StraightToGoal,
    LandmarkToLandmark,
    Hybrid,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::StraightToGoal, StrategyKind::LandmarkToLandmark, StrategyKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::StraightToGoal => "straight-to-goal",
            StrategyKind::LandmarkToLandmark => "landmark-to-landmark",
            StrategyKind::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Major-axis length beyond which the hybrid strategy switches to landmark seeking.
    pub hybrid_threshold_m: f64,
    pub goal_radius_m: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { kind: StrategyKind::StraightToGoal, hybrid_threshold_m: 50.0, goal_radius_m: 25.0 }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hybrid_threshold_m > 0.0 && self.goal_radius_m > 0.0) {
            return Err(Error::config("strategy thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Waypoint {
    Goal { pos: Vec2 },
    Landmark { id: usize, pos: Vec2 },
}

impl Waypoint {
    pub fn pos(&self) -> Vec2 {
        match *self {
            Waypoint::Goal { pos } | Waypoint::Landmark { pos, .. } => pos,
        }
    }
}

/// Nearest landmark that is closer to the goal than the vehicle is. Landmarks flagged in
/// `exclude` (indexed by position in the set) are skipped.
fn nearest_useful_landmark(b: &PoseBelief, lms: &LandmarkSet, exclude: &[bool], goal: Vec2) -> Option<Waypoint> {
    let here = b.pos();
    let to_goal = (goal - here).norm();
    lms.entries
        .iter()
        .enumerate()
        .filter(|(i, l)| !exclude.get(*i).copied().unwrap_or(false) && (goal - l.pos).norm() < to_goal)
        .map(|(_, l)| (l, (l.pos - here).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
        .map(|(l, _)| Waypoint::Landmark { id: l.id, pos: l.pos })
}

pub fn select_waypoint(
    strategy: &StrategyConfig,
    b: &PoseBelief,
    lms: &LandmarkSet,
    exclude: &[bool],
    goal: Vec2,
) -> Waypoint {
    let seek = match strategy.kind {
        StrategyKind::StraightToGoal => false,
        StrategyKind::LandmarkToLandmark => true,
        StrategyKind::Hybrid => ellipse_major_axis(b) >= strategy.hybrid_threshold_m,
    };
    let landmark = if seek { nearest_useful_landmark(b, lms, exclude, goal) } else { None };
    landmark.unwrap_or(Waypoint::Goal { pos: goal })
}

/// What the vehicle knows when it reaches an intersection.
#[derive(Debug, Clone, Copy)]
pub struct Approach {
    pub node: usize,
    /// Node the vehicle arrived from.
    pub from: usize,
    /// Estimated position of the intersection.
    pub est_node: Vec2,
    /// Estimated heading along the arrival road.
    pub est_heading: f64,
    pub target: Vec2,
}

/// An exit together with the network link it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitOption {
    pub option: DecisionOption,
    pub link: Link,
    pub key: DecisionKey,
}

/// Enumerates the permitted exits at an intersection. Turning back is offered only when no
/// other exit exists, and is then allowed regardless of one-way restrictions.
pub fn build_options(
    net: &RoadNetwork,
    a: &Approach,
    mem: &IntersectionMemory,
    visit: Option<usize>,
    cfg: &NavigatorConfig,
) -> Vec<ExitOption> {
    let in_bearing = net.link_bearing(a.from, a.node);
    let mut links: Vec<Link> = net.outgoing(a.node).filter(|l| l.node != a.from).collect();
    if links.is_empty() {
        links = net.links(a.node).iter().copied().filter(|l| l.node == a.from).collect();
    }
    links
        .into_iter()
        .enumerate()
        .map(|(index, link)| {
            let turn = wrap_angle(net.link_bearing(a.node, link.node) - in_bearing);
            let exit_bearing = wrap_angle(a.est_heading + turn);
            let ahead = a.est_node + unit(exit_bearing) * net.edges[link.edge].length_m;
            let (dist, _) = point_segment_distance(a.target, a.est_node, ahead);
            let goal_bearing = if dist <= cfg.arrive_radius_m { exit_bearing } else { bearing(a.target - ahead) };
            let key = decision_key(exit_bearing);
            let option = DecisionOption { index, exit_bearing, goal_bearing, penalty: mem.penalty(visit, key, cfg.penalty_step) };
            ExitOption { option, link, key }
        })
        .collect()
}

/// One line of the decision log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecisionRecord {
    pub step: u64,
    pub est_x: f64,
    pub est_y: f64,
    pub options: Vec<LoggedOption>,
    pub chosen: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LoggedOption {
    pub exit_bearing: f64,
    pub goal_bearing: f64,
    pub penalty: f64,
    pub cost: f64,
}

impl DecisionRecord {
    pub fn new(step: u64, est_node: Vec2, options: &[ExitOption], chosen: usize) -> Self {
        DecisionRecord {
            step,
            est_x: est_node.x,
            est_y: est_node.y,
            options: options
                .iter()
                .map(|o| LoggedOption {
                    exit_bearing: o.option.exit_bearing,
                    goal_bearing: o.option.goal_bearing,
                    penalty: o.option.penalty,
                    cost: o.option.cost(),
                })
                .collect(),
            chosen,
        }
    }
}
