//! Simulated intersection approaches for the scene estimator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use std::f64::consts::FRAC_PI_4;

use super::config::{ScenePerception, SceneStudyConfig};
use super::study::map_jobs;
use crate::citygen::RoadNetwork;
use crate::geom::wrap_angle;
use crate::scenestim::{
    simulate_cues, CueSimConfig, Feature, FeatureBelief, RangeObs, SceneConfig, SceneEstimator, SceneTraceRecord,
    SceneTruth, SegmentClass,
};
use crate::seed::{derive, rng_from, SimRng};
use crate::Result;

const TAG_SCENE: u64 = 0x5CE;
const TAG_NODE: u64 = 0x5CF;

/// A random intersection: a T or a crossing, with signs and traffic drawn independently.
pub fn random_intersection(rng: &mut SimRng) -> SceneTruth {
    let mut t = SceneTruth { intersection: true, ..SceneTruth::default() };
    loop {
        t.road_left = rng.random_bool(0.75);
        t.road_right = rng.random_bool(0.75);
        t.road_straight = rng.random_bool(0.7);
        if t.road_left || t.road_right {
            break;
        }
    }
    t.traffic_light = rng.random_bool(0.35);
    t.stop_sign = !t.traffic_light && rng.random_bool(0.5);
    t.cross_traffic_right = t.road_right && rng.random_bool(0.5);
    t.cross_traffic_left = t.road_left && rng.random_bool(0.5);
    t.parked_right = rng.random_bool(0.3);
    t.parked_left = rng.random_bool(0.3);
    t.lanes = t.road_straight && rng.random_bool(0.5);
    t.oncoming = t.road_straight && rng.random_bool(0.4);
    t.one_way_right = t.road_left && rng.random_bool(0.1);
    t.one_way_left = t.road_right && !t.one_way_right && rng.random_bool(0.1);
    t.do_not_enter = t.road_straight && rng.random_bool(0.05);
    t
}

/// A mid-block stretch of road: only straight-ahead and roadside cues exist.
pub fn random_non_intersection(rng: &mut SimRng) -> SceneTruth {
    SceneTruth {
        road_straight: true,
        parked_right: rng.random_bool(0.5),
        parked_left: rng.random_bool(0.5),
        lanes: rng.random_bool(0.6),
        oncoming: rng.random_bool(0.5),
        ..SceneTruth::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachRecord {
    pub index: usize,
    pub intersection: bool,
    pub cue_classes: usize,
    /// Distance at which every present feature first exceeded the threshold.
    pub detected_at_m: Option<f64>,
    /// Distance at which the intersection was first believed present.
    pub activated_at_m: Option<f64>,
}

fn range_observations(truth: &SceneTruth, d: f64, cues: &CueSimConfig, scene: &SceneConfig, rng: &mut SimRng) -> Vec<RangeObs> {
    let mut out = Vec::new();
    if d > cues.ranges.signs_m {
        return out;
    }
    let mut observe = |class: SegmentClass, dist: f64| {
        let c = scene.calib.class(class).expect("calibrated class");
        let measured = dist + rng.sample::<f64, _>(StandardNormal) * c.sigma_m;
        if let Some(h) = c.height_for(measured) {
            out.push(RangeObs { class, height_px: h });
        }
    };
    if truth.stop_sign {
        observe(SegmentClass::StopSign, d);
    }
    if truth.traffic_light {
        observe(SegmentClass::TrafficLight, d + scene.intersection_depth_m);
    }
    out
}

/// Drives toward `truth` from `start_m` in steps of `step_m` while farther than `stop_m`,
/// feeding simulated cues and range observations to a fresh estimator. `each` sees the
/// distance, frame index and estimator after every step.
#[allow(clippy::too_many_arguments)]
fn drive_approach(
    truth: &SceneTruth,
    cues: &CueSimConfig,
    scene: &SceneConfig,
    start_m: f64,
    step_m: f64,
    stop_m: f64,
    rng: &mut SimRng,
    mut each: impl FnMut(f64, u64, &SceneEstimator),
) -> Result<SceneEstimator> {
    let mut est = SceneEstimator::new(*scene);
    let mut d = start_m;
    let mut frame = 0u64;
    while d > stop_m {
        let observed = simulate_cues(truth, d, cues, rng);
        let ranges = range_observations(truth, d, cues, scene, rng);
        est.step(if frame == 0 { 0.0 } else { step_m }, &observed, &ranges)?;
        each(d, frame, &est);
        frame += 1;
        d -= step_m;
    }
    Ok(est)
}

/// Drives toward `truth` from the configured start distance, feeding simulated cues and range
/// observations to a fresh estimator every step.
pub fn run_approach(
    index: usize,
    truth: &SceneTruth,
    cfg: &SceneStudyConfig,
    rng: &mut SimRng,
    mut trace: Option<&mut Vec<SceneTraceRecord>>,
) -> Result<ApproachRecord> {
    let present: Vec<Feature> = Feature::ALL.iter().copied().filter(|&f| truth.feature_present(f)).collect();
    let (mut detected_at_m, mut activated_at_m) = (None, None);
    drive_approach(truth, &cfg.cues, &cfg.scene, cfg.start_distance_m, cfg.step_m, 0.0, rng, |d, frame, est| {
        if activated_at_m.is_none() && est.beliefs.activated {
            activated_at_m = Some(d);
        }
        if detected_at_m.is_none() && !present.is_empty() && present.iter().all(|&f| est.p(f) > cfg.present_threshold) {
            detected_at_m = Some(d);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(SceneTraceRecord::new(frame as f64, frame, est));
        }
    })?;
    Ok(ApproachRecord { index, intersection: truth.intersection, cue_classes: truth.cue_classes(), detected_at_m, activated_at_m })
}

/// Direction feature of the exit `node -> to` for a vehicle arriving from `from`, or `None`
/// for a reversal.
pub(crate) fn exit_feature(net: &RoadNetwork, from: usize, node: usize, to: usize) -> Option<Feature> {
    let turn = wrap_angle(net.link_bearing(node, to) - net.link_bearing(from, node));
    if turn.abs() <= FRAC_PI_4 {
        Some(Feature::Straight)
    } else if turn.abs() >= 3.0 * FRAC_PI_4 {
        None
    } else if turn > 0.0 {
        Some(Feature::Left)
    } else {
        Some(Feature::Right)
    }
}

/// The scene at `node` seen when arriving from `from`: roads and no-entry signs follow the
/// network; lights, signs and traffic are drawn per node and approach.
pub fn node_scene(net: &RoadNetwork, from: usize, node: usize, seed: u64) -> SceneTruth {
    let mut t = SceneTruth { intersection: net.arity(node) >= 3, ..SceneTruth::default() };
    let (mut left, mut straight, mut right) = (false, false, false);
    for l in net.links(node).iter().filter(|l| l.node != from) {
        let allowed = net.edges[l.edge].allows_from(node);
        match exit_feature(net, from, node, l.node) {
            Some(Feature::Left) => (t.road_left, left) = (true, left || allowed),
            Some(Feature::Straight) => (t.road_straight, straight) = (true, straight || allowed),
            Some(Feature::Right) => (t.road_right, right) = (true, right || allowed),
            _ => {}
        }
    }
    t.one_way_right = t.road_left && !left;
    t.one_way_left = t.road_right && !right;
    t.do_not_enter = t.road_straight && !straight;
    let mut rng = rng_from(derive(&[seed, TAG_NODE, node as u64]));
    t.traffic_light = rng.random_bool(0.35);
    t.stop_sign = !t.traffic_light && rng.random_bool(0.5);
    let mut rng = rng_from(derive(&[seed, TAG_NODE, node as u64, from as u64]));
    t.cross_traffic_right = right && rng.random_bool(0.5);
    t.cross_traffic_left = left && rng.random_bool(0.5);
    t.parked_right = rng.random_bool(0.3);
    t.parked_left = rng.random_bool(0.3);
    t.lanes = straight && rng.random_bool(0.5);
    t.oncoming = straight && rng.random_bool(0.4);
    t
}

/// Feature beliefs after driving up to `stop_m` from the intersection described by `truth`.
pub fn perceive_scene(truth: &SceneTruth, sp: &ScenePerception, stop_m: f64, rng: &mut SimRng) -> Result<FeatureBelief> {
    let est = drive_approach(truth, &sp.cues, &sp.scene, sp.start_distance_m, sp.step_m, stop_m, rng, |_, _, _| {})?;
    Ok(est.beliefs)
}

fn scene_for(index: usize, cfg: &SceneStudyConfig, master: u64) -> (SceneTruth, SimRng) {
    let mut rng = rng_from(derive(&[master, TAG_SCENE, index as u64]));
    let truth = if index < cfg.approaches {
        loop {
            let t = random_intersection(&mut rng);
            if t.cue_classes() >= cfg.min_cue_classes {
                break t;
            }
        }
    } else {
        random_non_intersection(&mut rng)
    };
    (truth, rng)
}

/// `approaches` intersection approaches followed by as many non-intersection approaches.
pub fn run_scene_study(cfg: &SceneStudyConfig, master: u64, threads: usize) -> Result<Vec<ApproachRecord>> {
    map_jobs(2 * cfg.approaches, threads, |i| {
        let (truth, mut rng) = scene_for(i, cfg, master);
        run_approach(i, &truth, cfg, &mut rng, None)
    })
}

/// Trace of one approach of the study, for inspection.
pub fn trace_approach(cfg: &SceneStudyConfig, master: u64, index: usize) -> Result<(ApproachRecord, Vec<SceneTraceRecord>)> {
    let (truth, mut rng) = scene_for(index, cfg, master);
    let mut trace = Vec::new();
    let rec = run_approach(index, &truth, cfg, &mut rng, Some(&mut trace))?;
    Ok((rec, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub intersections: usize,
    pub detected: usize,
    pub detection_rate: Option<f64>,
    pub mean_detect_distance_m: Option<f64>,
    pub non_intersections: usize,
    pub false_activations: usize,
    pub false_rate: Option<f64>,
}

pub fn summarize_scenes(records: &[ApproachRecord]) -> SceneSummary {
    let ints: Vec<&ApproachRecord> = records.iter().filter(|r| r.intersection).collect();
    let non: Vec<&ApproachRecord> = records.iter().filter(|r| !r.intersection).collect();
    let dists: Vec<f64> = ints.iter().filter_map(|r| r.detected_at_m).collect();
    let false_activations = non.iter().filter(|r| r.activated_at_m.is_some() || r.detected_at_m.is_some()).count();
    SceneSummary {
        intersections: ints.len(),
        detected: dists.len(),
        detection_rate: (!ints.is_empty()).then(|| dists.len() as f64 / ints.len() as f64),
        mean_detect_distance_m: super::stats::mean(&dists),
        non_intersections: non.len(),
        false_activations,
        false_rate: (!non.is_empty()).then(|| false_activations as f64 / non.len() as f64),
    }
}
