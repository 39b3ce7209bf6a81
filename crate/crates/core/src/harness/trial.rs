//! The single-trial simulation loop.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::scene::{exit_feature, node_scene, perceive_scene};
use crate::citygen::{
    default_min_separation, generate_map, place_landmarks, sample_endpoints_with, sample_goal_from, LandmarkSet,
    RoadNetwork, ScenarioEndpoints, DEFAULT_MAX_ENDPOINT_ATTEMPTS,
};
use crate::estimator::{
    ellipse_major_axis, in_gate, is_lost, predict, update_compass, update_landmark, BeliefTraceRecord, LandmarkFix,
    PoseBelief,
};
use crate::geom::{wrap_angle, Vec2};
use crate::navigator::{
    build_options, decide_intersection, select_waypoint, Approach, DecisionOption, DecisionRecord, ExitOption,
    IntersectionMemory,
    Waypoint,
};
use crate::seed::{derive, hash_uniform, rng_from, SimRng};
use crate::vehicle::{
    advance_path, sample_slip, sense, step_bicycle, step_distance, PathFollower, VehicleState, VehicleTraceRecord,
    PATH_CAPTURE_M,
};
use crate::Result;

const TAG_SCENARIO: u64 = 1;
const TAG_MAP: u64 = 2;
const TAG_LANDMARKS: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_DETECT: u64 = 5;
const TAG_PERCEPTION: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Reached,
    Lost,
    Timeout,
}

/// One row of `trials.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub outcome: Outcome,
    pub manhattan_m: f64,
    pub euclidean_m: f64,
    pub final_axis_m: f64,
    pub landmark_updates: u32,
    pub decisions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialMode {
    /// Drive to one goal.
    ToGoal,
    /// Keep driving to fresh goals until lost or until `cap_m` of travel.
    Range { cap_m: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub vehicle: Vec<VehicleTraceRecord>,
    pub belief: Vec<BeliefTraceRecord>,
    pub decisions: Vec<DecisionRecord>,
}

/// City, landmarks and endpoints of one trial. Depends on the seed, the map parameters and the
/// landmark density only, so every cell of a study sees the same cities and start/goal pairs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: RoadNetwork,
    pub landmarks: LandmarkSet,
    pub endpoints: ScenarioEndpoints,
    rng: SimRng,
}

pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let mut rng = rng_from(derive(&[seed, TAG_SCENARIO]));
    let mut map = cfg.map;
    if let Some([lo, hi]) = cfg.map_area_range_km2 {
        map.area_km2 = if hi > lo { rng.random_range(lo..hi) } else { lo };
    }
    let net = generate_map(&map, derive(&[seed, TAG_MAP]))?;
    let landmarks = place_landmarks(&net, cfg.landmark_density_per_km2, derive(&[seed, TAG_LANDMARKS]))?;
    let (lo, hi) = match cfg.endpoint_distance_m {
        Some([lo, hi]) => (lo, hi),
        None => (default_min_separation(&net), f64::INFINITY),
    };
    let endpoints = sample_endpoints_with(&net, &mut rng, lo, hi, DEFAULT_MAX_ENDPOINT_ATTEMPTS)?;
    Ok(Scenario { net, landmarks, endpoints, rng })
}

/// Uniform grid over landmark positions for radius queries.
struct LandmarkGrid {
    cell: f64,
    origin: Vec2,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl LandmarkGrid {
    fn new(net: &RoadNetwork, lms: &LandmarkSet, cell: f64) -> Self {
        let b = net.bounds;
        let origin = Vec2::new(b.min_x, b.min_y);
        let nx = ((b.max_x - b.min_x) / cell).floor() as usize + 1;
        let ny = ((b.max_y - b.min_y) / cell).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        let mut grid = LandmarkGrid { cell, origin, nx, ny, cells: Vec::new() };
        for (i, l) in lms.entries.iter().enumerate() {
            let (cx, cy) = grid.cell_of(l.pos);
            cells[cy * nx + cx].push(i);
        }
        grid.cells = cells;
        grid
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = (p - self.origin) / self.cell;
        (
            (c.x.floor().max(0.0) as usize).min(self.nx - 1),
            (c.y.floor().max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Indices of landmarks within `radius` (at most one cell) of `p`, with their distances.
    fn near(&self, lms: &LandmarkSet, p: Vec2, radius: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (cx, cy) = self.cell_of(p);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1) {
                for &i in &self.cells[y * self.nx + x] {
                    let d = (lms.entries[i].pos - p).norm();
                    if d <= radius {
                        out.push((i, d));
                    }
                }
            }
        }
    }
}

/// A stay of the vehicle inside a landmark's sensing radius.
#[derive(Debug, Clone, Copy)]
struct Pass {
    index: u64,
    closest: f64,
    drawn: bool,
}

/// Position of `world` relative to the true pose, re-expressed around the estimated pose.
fn perceive(truth: &VehicleState, b: &PoseBelief, world: Vec2) -> Vec2 {
    let rel = Rotation2::new(-truth.theta) * (world - truth.pos());
    b.pos() + Rotation2::new(b.theta()) * rel
}

fn initial_belief(cfg: &ScenarioConfig, truth: &VehicleState, rng: &mut SimRng) -> PoseBelief {
    let sp = cfg.initial_pos_sigma_m;
    let sh = cfg.initial_heading_sigma;
    let mut n = || rng.sample::<f64, _>(StandardNormal);
    let (ex, ey, eh) = (n() * sp, n() * sp, n() * sh);
    let cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(sp * sp, sp * sp, sh * sh));
    PoseBelief::new(truth.x + ex, truth.y + ey, truth.theta + eh, cov)
}

/// Runs one trial to a goal with `cfg.seed`.
pub fn run_trial(cfg: &ScenarioConfig) -> Result<TrialRecord> {
    cfg.validate()?;
    simulate(cfg, cfg.seed, TrialMode::ToGoal, false).map(|(r, _)| r)
}

/// Runs one trial, optionally collecting the step-by-step traces.
pub fn simulate(cfg: &ScenarioConfig, seed: u64, mode: TrialMode, trace: bool) -> Result<(TrialRecord, Option<TrialTrace>)> {
    let Scenario { net, landmarks, endpoints, mut rng } = build_scenario(cfg, seed)?;
    simulate_in(cfg, seed, mode, trace, &net, &landmarks, endpoints, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn simulate_in(
    cfg: &ScenarioConfig,
    seed: u64,
    mode: TrialMode,
    trace_on: bool,
    net: &RoadNetwork,
    landmarks: &LandmarkSet,
    endpoints: ScenarioEndpoints,
    goal_rng: &mut SimRng,
) -> Result<(TrialRecord, Option<TrialTrace>)> {
    let p = cfg.vehicle;
    let noise = &cfg.noise;
    let mut rng = rng_from(derive(&[seed, TAG_NOISE]));
    let mut trace = trace_on.then(TrialTrace::default);

    let mut truth = VehicleState::new(endpoints.start.x, endpoints.start.y, endpoints.start_heading, 0.0);
    let mut b = initial_belief(cfg, &truth, &mut rng);
    let mut follower = PathFollower::new(cfg.gains);
    let mut nodes = vec![endpoints.start_node, endpoints.first_node];
    let mut path: Vec<Vec2> = nodes.iter().map(|&n| net.pos(n)).collect();

    let mut goal_node = endpoints.goal_node;
    let mut goal = endpoints.goal;
    let euclidean = (endpoints.goal - endpoints.start).norm();
    let max_steps = match mode {
        TrialMode::ToGoal => cfg
            .timeout_steps
            .unwrap_or_else(|| (cfg.timeout_factor * euclidean / p.v_cruise / p.dt_s).ceil() as u64),
        TrialMode::Range { cap_m } => (4.0 * cap_m / p.v_cruise / p.dt_s).ceil() as u64,
    };

    let compass_every = noise.compass_period_steps(p.dt_s);
    let grid = LandmarkGrid::new(net, landmarks, cfg.landmark_sensing_radius_m);
    let mut nearby = Vec::new();
    let mut passes: BTreeMap<usize, Pass> = BTreeMap::new();
    let mut pass_count = vec![0u64; landmarks.len()];
    let mut excluded = vec![false; landmarks.len()];
    let mut target: Option<(usize, u32)> = None;
    let mut mem = IntersectionMemory::new();

    let mut manhattan = 0.0;
    let mut landmark_updates = 0u32;
    let mut decisions = 0u32;
    let mut step = 0u64;

    let outcome = loop {
        step += 1;
        let u = follower.command(&truth, &path, &p).saturate(&p);
        let arc = step_distance(truth.v, u.accel, p.dt_s);
        let slip = sample_slip(arc, noise, &mut rng);
        let mut next = step_bicycle(&truth, u, &p);
        next.theta = wrap_angle(next.theta + slip.yaw_err);
        let sensor_noise = if step % compass_every == 0 { *noise } else { noise.without_compass() };
        let readings = sense(&truth, &next, arc, slip, &sensor_noise, &mut rng);
        truth = next;
        manhattan += arc;

        b = predict(&b, readings.odo_distance, readings.odo_distance * u.steer / p.wheelbase_m, noise);
        if let (Some(z), Some(sigma)) = (readings.compass, noise.compass_sigma()) {
            b = update_compass(&b, z, sigma);
        }

        let popped = advance_path(&mut path, truth.pos(), PATH_CAPTURE_M);
        nodes.drain(..popped);

        // Landmark passes: one detection draw at the closest approach of each pass.
        grid.near(landmarks, truth.pos(), cfg.landmark_sensing_radius_m, &mut nearby);
        passes.retain(|i, _| nearby.iter().any(|(j, _)| j == i));
        for &(i, d) in &nearby {
            let pass = passes.entry(i).or_insert_with(|| {
                pass_count[i] += 1;
                Pass { index: pass_count[i], closest: d, drawn: false }
            });
            if pass.drawn {
                continue;
            }
            if d <= pass.closest {
                pass.closest = d;
                continue;
            }
            pass.drawn = true;
            let lm = &landmarks.entries[i];
            let draw = hash_uniform(&[seed, TAG_DETECT, lm.id as u64, pass.index]);
            if in_gate(&b, lm.pos) && draw < cfg.landmark_detection_rate {
                let sigma = noise.landmark_fix_sigma_m;
                let z = truth.pos()
                    + Vec2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * sigma;
                let fix = LandmarkFix { landmark: lm.id, x_m: z.x, y_m: z.y, sigma_m: sigma };
                if let Ok(post) = update_landmark(&b, &fix) {
                    b = post;
                    landmark_updates += 1;
                    excluded[i] = true;
                }
            }
        }
        if let Some((i, _)) = target {
            if excluded[i] || (landmarks.entries[i].pos - b.pos()).norm() <= cfg.strategy.goal_radius_m {
                excluded[i] = true;
                target = None;
            }
        }

        if let Some(t) = trace.as_mut() {
            t.vehicle.push(VehicleTraceRecord::new(step, &truth, u, &readings));
            t.belief.push(BeliefTraceRecord::new(step, &b, cfg.lost_threshold_m));
        }

        if (truth.pos() - goal).norm() <= cfg.strategy.goal_radius_m {
            match mode {
                TrialMode::ToGoal => break Outcome::Reached,
                TrialMode::Range { .. } => {
                    let min_sep = default_min_separation(net);
                    if let Some(g) = sample_goal_from(net, goal_rng, goal_node, min_sep, DEFAULT_MAX_ENDPOINT_ATTEMPTS) {
                        goal_node = g;
                        goal = net.pos(g);
                        mem = IntersectionMemory::new();
                        target = None;
                    }
                }
            }
        }
        if is_lost(&b, cfg.lost_threshold_m) {
            break Outcome::Lost;
        }
        if let TrialMode::Range { cap_m } = mode {
            if manhattan >= cap_m {
                break Outcome::Timeout;
            }
        }
        if step >= max_steps {
            break Outcome::Timeout;
        }

        if nodes.len() == 2 && (truth.pos() - path[1]).norm() <= cfg.decide_radius_m {
            let (from, node) = (nodes[0], nodes[1]);
            let est_node = perceive(&truth, &b, path[1]);
            let est_heading = wrap_angle(b.theta() + wrap_angle(net.link_bearing(from, node) - truth.theta));
            let mut wp = select_waypoint(&cfg.strategy, &b, landmarks, &excluded, goal);
            if let Waypoint::Landmark { id, .. } = wp {
                let count = match target {
                    Some((t, c)) if t == id => c + 1,
                    _ => 1,
                };
                if count > cfg.landmark_decision_cap {
                    excluded[id] = true;
                    target = None;
                    wp = select_waypoint(&cfg.strategy, &b, landmarks, &excluded, goal);
                    if let Waypoint::Landmark { id, .. } = wp {
                        target = Some((id, 1));
                    }
                } else {
                    target = Some((id, count));
                }
            } else {
                target = None;
            }
            let approach = Approach { node, from, est_node, est_heading, target: wp.pos() };
            let visit = mem.match_intersection(est_node, cfg.navigator.match_radius_m);
            let mut opts = build_options(net, &approach, &mem, visit, &cfg.navigator);
            if let (Some(sp), true) = (&cfg.scene_perception, net.arity(node) >= 3) {
                let scene = node_scene(net, from, node, seed);
                let mut prng = rng_from(derive(&[seed, TAG_PERCEPTION, decisions as u64]));
                let beliefs = perceive_scene(&scene, sp, cfg.decide_radius_m, &mut prng)?;
                let seen: Vec<ExitOption> = opts
                    .iter()
                    .copied()
                    .filter(|o| exit_feature(net, from, node, o.link.node).is_some_and(|f| beliefs.p(f) > sp.exit_threshold))
                    .collect();
                if !seen.is_empty() {
                    opts = seen;
                }
            }
            let choices: Vec<DecisionOption> = opts.iter().map(|o| o.option).collect();
            let chosen = decide_intersection(&choices)?;
            mem.record_visit(est_node, opts[chosen].key, cfg.navigator.match_radius_m);
            let next_node = opts[chosen].link.node;
            nodes.push(next_node);
            path.push(net.pos(next_node));
            decisions += 1;
            if let Some(t) = trace.as_mut() {
                t.decisions.push(DecisionRecord::new(step, est_node, &opts, chosen));
            }
        }
    };

    let record = TrialRecord {
        seed,
        outcome,
        manhattan_m: manhattan,
        euclidean_m: euclidean,
        final_axis_m: ellipse_major_axis(&b),
        landmark_updates,
        decisions,
    };
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citygen::MapParams;
    use crate::estimator::NoiseConfig;

    fn quiet(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            map: MapParams { area_km2: 4.0, dead_end_fraction: 0.0, one_way_fraction: 0.0, ..MapParams::default() },
            map_area_range_km2: None,
            endpoint_distance_m: Some([1000.0, 1200.0]),
            noise: NoiseConfig {
                compass_2sigma: None,
                encoder_counts_per_rev: None,
                slip_sigma: 0.0,
                heading_floor_var: 0.0,
                ..NoiseConfig::default()
            },
            landmark_density_per_km2: 0.0,
            initial_pos_sigma_m: 0.0,
            initial_heading_sigma: 0.0,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_trial_tracks_truth() {
        for seed in 1..4 {
            let cfg = quiet(seed);
            let (rec, trace) = simulate(&cfg, seed, TrialMode::ToGoal, true).unwrap();
            assert_eq!(rec.outcome, Outcome::Reached, "{rec:?}");
            assert_eq!(rec.final_axis_m, 0.0);
            assert!(rec.manhattan_m >= rec.euclidean_m - cfg.strategy.goal_radius_m);
            let t = trace.unwrap();
            for (v, bl) in t.vehicle.iter().zip(&t.belief) {
                assert!((v.x - bl.x).abs() < 1e-6 && (v.y - bl.y).abs() < 1e-6, "step {}", v.step);
                assert!(wrap_angle(v.theta - bl.theta).abs() < 1e-9);
            }
            assert_eq!(t.decisions.len() as u32, rec.decisions);
        }
    }

    #[test]
    fn dense_landmarks_without_noise_reach_the_goal() {
        let mut cfg = quiet(5);
        cfg.landmark_density_per_km2 = 10.0;
        cfg.landmark_detection_rate = 1.0;
        cfg.initial_pos_sigma_m = 1.0;
        let rec = run_trial(&cfg).unwrap();
        assert_eq!(rec.outcome, Outcome::Reached);
        assert!(rec.final_axis_m <= 4.0 + 1e-9);
    }

    #[test]
    fn no_compass_no_landmarks_gets_lost_early() {
        let mut cfg = ScenarioConfig { landmark_density_per_km2: 0.0, ..ScenarioConfig::default() };
        cfg.noise.compass_2sigma = None;
        let mut total = 0.0;
        for seed in 0..20 {
            cfg.seed = seed;
            let rec = run_trial(&cfg).unwrap();
            assert_eq!(rec.outcome, Outcome::Lost);
            total += rec.manhattan_m;
        }
        assert!(total / 20.0 < 1000.0, "{}", total / 20.0);
    }

    #[test]
    fn same_config_same_record() {
        let cfg = ScenarioConfig { seed: 17, ..ScenarioConfig::default() };
        assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
    }

    #[test]
    fn invalid_config_fails_before_simulating() {
        let cfg = ScenarioConfig { landmark_detection_rate: 2.0, ..ScenarioConfig::default() };
        assert!(matches!(run_trial(&cfg), Err(crate::Error::Config(_))));
    }

    #[test]
    fn range_mode_stops_at_the_cap() {
        let mut cfg = quiet(3);
        cfg.endpoint_distance_m = None;
        let (rec, _) = simulate(&cfg, 3, TrialMode::Range { cap_m: 3000.0 }, false).unwrap();
        assert_eq!(rec.outcome, Outcome::Timeout);
        assert!(rec.manhattan_m >= 3000.0 && rec.manhattan_m < 3002.0);
    }

    #[test]
    fn grid_query_matches_brute_force() {
        let cfg = ScenarioConfig { landmark_density_per_km2: 10.0, ..quiet(8) };
        let sc = build_scenario(&cfg, 8).unwrap();
        let grid = LandmarkGrid::new(&sc.net, &sc.landmarks, 25.0);
        let mut rng = rng_from(1);
        let mut out = Vec::new();
        let b = sc.net.bounds;
        for _ in 0..500 {
            let p = Vec2::new(rng.random_range(b.min_x..b.max_x), rng.random_range(b.min_y..b.max_y));
            grid.near(&sc.landmarks, p, 25.0, &mut out);
            let mut got: Vec<usize> = out.iter().map(|o| o.0).collect();
            got.sort();
            let want: Vec<usize> = (0..sc.landmarks.len())
                .filter(|&i| (sc.landmarks.entries[i].pos - p).norm() <= 25.0)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn perceived_exits_still_reach_the_goal() {
        let mut cfg = quiet(6);
        cfg.scene_perception = Some(crate::harness::ScenePerception::default());
        let (rec, _) = simulate(&cfg, 6, TrialMode::ToGoal, false).unwrap();
        assert_eq!(rec.outcome, Outcome::Reached, "{rec:?}");
        let plain = simulate(&quiet(6), 6, TrialMode::ToGoal, false).unwrap().0;
        assert_eq!(plain, run_trial(&quiet(6)).unwrap());
    }
}
