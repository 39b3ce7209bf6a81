//! Stochastic cue generation, the per-step scene estimator and log replay.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::range::{kf1d_predict, kf1d_update, CalibCurve, RangeBelief};
use super::vision::{classify_parked_car, track_cross_traffic, SegmentClass, SegmentObs};
use super::{propagate, step_messages, CueEvent, CueKind, Feature, FeatureBelief};
use crate::{Error, Result};

/// What is actually at the place the vehicle approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneTruth {
    pub intersection: bool,
    pub road_left: bool,
    pub road_straight: bool,
    pub road_right: bool,
    pub traffic_light: bool,
    pub stop_sign: bool,
    pub cross_traffic_right: bool,
    pub cross_traffic_left: bool,
    pub parked_right: bool,
    pub parked_left: bool,
    pub lanes: bool,
    pub oncoming: bool,
    pub one_way_right: bool,
    pub one_way_left: bool,
    pub do_not_enter: bool,
}

impl SceneTruth {
    /// Whether the object behind a cue is there to be seen.
    pub fn has(&self, kind: CueKind) -> bool {
        use CueKind::*;
        match kind {
            TrafficLight => self.traffic_light,
            StopSign => self.stop_sign,
            RoadRight => self.road_right,
            RoadStraight => self.road_straight,
            RoadLeft => self.road_left,
            CrossTrafficRight => self.cross_traffic_right,
            CrossTrafficLeft => self.cross_traffic_left,
            ParkedCarRight => self.parked_right,
            ParkedCarLeft => self.parked_left,
            Lanes => self.lanes,
            OncomingOutgoing => self.oncoming,
            OneWayRight => self.one_way_right,
            OneWayLeft => self.one_way_left,
            DoNotEnter => self.do_not_enter,
        }
    }

    /// Whether a feature is really present: a direction needs road and no sign forbidding it.
    pub fn feature_present(&self, f: Feature) -> bool {
        match f {
            Feature::Intersection => self.intersection,
            Feature::Left => self.intersection && self.road_left && !self.one_way_right,
            Feature::Straight => self.intersection && self.road_straight && !self.do_not_enter,
            Feature::Right => self.intersection && self.road_right && !self.one_way_left,
        }
    }

    /// Number of distinct cue kinds with something to detect.
    pub fn cue_classes(&self) -> usize {
        CueKind::ALL.iter().filter(|&&k| self.has(k)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingRanges {
    pub signs_m: f64,
    pub road_m: f64,
    pub cross_traffic_m: f64,
    pub parked_m: f64,
    pub lanes_m: f64,
}

impl Default for SensingRanges {
    fn default() -> Self {
        SensingRanges { signs_m: 60.0, road_m: 50.0, cross_traffic_m: 45.0, parked_m: 40.0, lanes_m: 60.0 }
    }
}

impl SensingRanges {
    pub fn for_kind(&self, kind: CueKind) -> f64 {
        use CueKind::*;
        match kind {
            TrafficLight | StopSign | OneWayRight | OneWayLeft | DoNotEnter => self.signs_m,
            RoadRight | RoadStraight | RoadLeft => self.road_m,
            CrossTrafficRight | CrossTrafficLeft => self.cross_traffic_m,
            ParkedCarRight | ParkedCarLeft => self.parked_m,
            Lanes | OncomingOutgoing => self.lanes_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueSimConfig {
    /// Per-frame detection probability for present, in-range cues.
    pub rate: f64,
    pub rate_overrides: BTreeMap<CueKind, f64>,
    pub ranges: SensingRanges,
}

impl Default for CueSimConfig {
    fn default() -> Self {
        CueSimConfig { rate: 0.3, rate_overrides: BTreeMap::new(), ranges: SensingRanges::default() }
    }
}

impl CueSimConfig {
    pub fn rate_for(&self, kind: CueKind) -> f64 {
        self.rate_overrides.get(&kind).copied().unwrap_or(self.rate)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = std::iter::once(self.rate).chain(self.rate_overrides.values().copied());
        for r in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("cue detection rate {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// One frame of cue observations at `distance_m` from the intersection. Every cue kind is
/// reported; absent or out-of-range objects are never detected.
pub fn simulate_cues<R: Rng + ?Sized>(truth: &SceneTruth, distance_m: f64, cfg: &CueSimConfig, rng: &mut R) -> Vec<CueEvent> {
    CueKind::ALL
        .iter()
        .map(|&kind| {
            let visible = truth.has(kind) && distance_m <= cfg.ranges.for_kind(kind);
            let detected = visible && rng.random_bool(cfg.rate_for(kind));
            CueEvent::new(kind, detected)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub calib: CalibCurve,
    /// Distance from the start to the end of an intersection, used to convert light ranges.
    pub intersection_depth_m: f64,
    /// Range filter process noise per step, m².
    pub range_q: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig { calib: CalibCurve::default(), intersection_depth_m: 15.0, range_q: 0.01 }
    }
}

/// A height observation of a sign or light, to be turned into a range measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeObs {
    pub class: SegmentClass,
    pub height_px: f64,
}

/// Scene estimator state for one approach.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneEstimator {
    pub cfg: SceneConfig,
    pub beliefs: FeatureBelief,
    /// Estimated distance to the start of the intersection, once measured.
    pub range: Option<RangeBelief>,
}

impl SceneEstimator {
    pub fn new(cfg: SceneConfig) -> Self {
        SceneEstimator { cfg, beliefs: FeatureBelief::new(), range: None }
    }

    fn measure(&mut self, z: f64, sigma: f64) {
        let r = sigma * sigma;
        self.range = Some(match self.range {
            None => RangeBelief { x: z, var: r, q: self.cfg.range_q, r },
            Some(rb) => kf1d_update(&RangeBelief { r, ..rb }, z),
        });
    }

    /// Advances by `odo_dt_m`, folds in range observations (averaged per class) and cues.
    pub fn step(&mut self, odo_dt_m: f64, cues: &[CueEvent], ranges: &[RangeObs]) -> Result<()> {
        if let Some(rb) = self.range {
            self.range = Some(kf1d_predict(&rb, odo_dt_m));
        }
        for class in [SegmentClass::StopSign, SegmentClass::TrafficLight] {
            let dists: Vec<(f64, f64)> = ranges
                .iter()
                .filter(|o| o.class == class)
                .filter_map(|o| self.cfg.calib.distance_from_height(class, o.height_px))
                .collect();
            if dists.is_empty() {
                continue;
            }
            let mean = dists.iter().map(|d| d.0).sum::<f64>() / dists.len() as f64;
            let start = if class == SegmentClass::TrafficLight { mean - self.cfg.intersection_depth_m } else { mean };
            self.measure(start, dists[0].1);
        }
        let msgs = step_messages(cues, &self.beliefs, self.range.map(|r| r.x));
        self.beliefs = propagate(&self.beliefs, &msgs)?;
        Ok(())
    }

    pub fn p(&self, f: Feature) -> f64 {
        self.beliefs.p(f)
    }
}

/// One line of a cue replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayFrame {
    pub t: f64,
    pub frame: u64,
    #[serde(default)]
    pub cues: Vec<CueEvent>,
    pub odo_dt_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentObs>>,
}

/// One line of the feature-belief trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTraceRecord {
    pub t: f64,
    pub frame: u64,
    pub p_intersection: f64,
    pub p_left: f64,
    pub p_straight: f64,
    pub p_right: f64,
    pub activated: bool,
    pub range_m: Option<f64>,
    pub range_sigma_m: Option<f64>,
}

impl SceneTraceRecord {
    pub fn new(t: f64, frame: u64, est: &SceneEstimator) -> Self {
        SceneTraceRecord {
            t,
            frame,
            p_intersection: est.p(Feature::Intersection),
            p_left: est.p(Feature::Left),
            p_straight: est.p(Feature::Straight),
            p_right: est.p(Feature::Right),
            activated: est.beliefs.activated,
            range_m: est.range.map(|r| r.x),
            range_sigma_m: est.range.map(|r| r.var.sqrt()),
        }
    }
}

/// Runs the estimator over a replay log. Sign and light segments become range measurements;
/// car segments are tracked against the previous frame's segments and each positive
/// cross-traffic or parked-car classification adds a detected cue.
pub fn replay_scene(frames: &[ReplayFrame], cfg: SceneConfig) -> Result<Vec<SceneTraceRecord>> {
    let mut est = SceneEstimator::new(cfg);
    let mut prev_segments: Vec<SegmentObs> = Vec::new();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let mut cues = f.cues.clone();
        let mut ranges = Vec::new();
        let segments = f.segments.as_deref().unwrap_or(&[]);
        for s in segments {
            if s.class != SegmentClass::Car {
                ranges.push(RangeObs { class: s.class, height_px: s.height_px });
            }
        }
        let (ct_r, ct_l) = track_cross_traffic(&prev_segments, segments);
        let mut derived = vec![(CueKind::CrossTrafficRight, ct_r), (CueKind::CrossTrafficLeft, ct_l)];
        for c in segments {
            for p in &prev_segments {
                let (pc_r, pc_l) = classify_parked_car(p, c);
                derived.push((CueKind::ParkedCarRight, pc_r));
                derived.push((CueKind::ParkedCarLeft, pc_l));
            }
        }
        cues.extend(derived.into_iter().filter(|d| d.1).map(|(k, _)| CueEvent::new(k, true)));
        est.step(f.odo_dt_m, &cues, &ranges)?;
        out.push(SceneTraceRecord::new(f.t, f.frame, &est));
        if f.segments.is_some() {
            prev_segments = segments.to_vec();
        }
    }
    Ok(out)
}
