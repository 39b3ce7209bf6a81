//! Real-time intersection scene estimation from binary environmental cues.
//!
//! Each cue (a stop sign, a road surface to the left, cross traffic moving right, ...) sends a
//! message to the intersection feature it bears on. A feature's belief is the normalized
//! product of all messages it received, kept as a running log-odds sum. Until the
//! intersection itself is established only signs, lights and side-road surfaces are heard;
//! afterwards every cue is live, and directions that stay silent close to the intersection
//! receive a weak dissenting message.

mod range;
mod sim;
mod vision;

pub use range::{fit_inverse_height, kf1d_predict, kf1d_update, CalibCurve, ClassCalib, RangeBelief};
pub use sim::{
    replay_scene, simulate_cues, CueSimConfig, RangeObs, ReplayFrame, SceneConfig, SceneEstimator, SceneTraceRecord,
    SceneTruth, SensingRanges,
};
pub use vision::{
    classify_parked_car, classify_road_rois, track_cross_traffic, BBox, RoadCues, RoadMask, Roi, SegmentClass, SegmentObs,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Belief threshold that establishes an intersection.
pub const ACTIVATION_THRESHOLD: f64 = 0.9;
pub const NEUTRAL: f64 = 0.5;
pub const DISSENT: f64 = 0.49;
pub const DISSENT_RADIUS_M: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CueKind {
    #[serde(rename = "z_TL")]
    TrafficLight,
    #[serde(rename = "z_SS")]
    StopSign,
    #[serde(rename = "z_roadR")]
    RoadRight,
    #[serde(rename = "z_roadS")]
    RoadStraight,
    #[serde(rename = "z_roadL")]
    RoadLeft,
    #[serde(rename = "z_ctR")]
    CrossTrafficRight,
    #[serde(rename = "z_ctL")]
    CrossTrafficLeft,
    #[serde(rename = "z_pcR")]
    ParkedCarRight,
    #[serde(rename = "z_pcL")]
    ParkedCarLeft,
    #[serde(rename = "z_lanes")]
    Lanes,
    #[serde(rename = "z_onout")]
    OncomingOutgoing,
    #[serde(rename = "z_owR")]
    OneWayRight,
    #[serde(rename = "z_owL")]
    OneWayLeft,
    #[serde(rename = "z_DNE")]
    DoNotEnter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Intersection,
    Left,
    Straight,
    Right,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Intersection, Feature::Left, Feature::Straight, Feature::Right];
    pub const DIRECTIONS: [Feature; 3] = [Feature::Left, Feature::Straight, Feature::Right];

    fn slot(self) -> usize {
        self as usize
    }
}

/// How a detected cue relates to a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Supports,
    Excludes,
}

impl CueKind {
    pub const ALL: [CueKind; 14] = [
        CueKind::TrafficLight,
        CueKind::StopSign,
        CueKind::RoadRight,
        CueKind::RoadStraight,
        CueKind::RoadLeft,
        CueKind::CrossTrafficRight,
        CueKind::CrossTrafficLeft,
        CueKind::ParkedCarRight,
        CueKind::ParkedCarLeft,
        CueKind::Lanes,
        CueKind::OncomingOutgoing,
        CueKind::OneWayRight,
        CueKind::OneWayLeft,
        CueKind::DoNotEnter,
    ];

    /// Detection precision of the cue's detector.
    pub fn precision(self) -> f64 {
        use CueKind::*;
        match self {
            StopSign => 0.97,
            TrafficLight => 0.95,
            RoadRight | RoadStraight | RoadLeft => 0.77,
            CrossTrafficRight | CrossTrafficLeft => 0.86,
            ParkedCarRight | ParkedCarLeft => 0.83,
            Lanes | OncomingOutgoing => 0.96,
            OneWayRight | OneWayLeft | DoNotEnter => 0.95,
        }
    }

    /// Features this cue sends messages to.
    pub fn edges(self) -> &'static [(Feature, Relation)] {
        use CueKind::*;
        use Feature::*;
        use Relation::*;
        match self {
            TrafficLight | StopSign => &[(Intersection, Supports)],
            RoadRight => &[(Right, Supports), (Intersection, Supports)],
            RoadLeft => &[(Left, Supports), (Intersection, Supports)],
            RoadStraight => &[(Straight, Supports)],
            CrossTrafficRight | ParkedCarRight => &[(Right, Supports)],
            CrossTrafficLeft | ParkedCarLeft => &[(Left, Supports)],
            Lanes | OncomingOutgoing => &[(Straight, Supports)],
            OneWayRight => &[(Left, Excludes)],
            OneWayLeft => &[(Right, Excludes)],
            DoNotEnter => &[(Straight, Excludes)],
        }
    }

    /// Cues heard before the intersection is established.
    pub fn establishes_intersection(self) -> bool {
        matches!(self, CueKind::TrafficLight | CueKind::StopSign | CueKind::RoadRight | CueKind::RoadLeft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueEvent {
    pub kind: CueKind,
    pub detected: bool,
}

impl CueEvent {
    pub fn new(kind: CueKind, detected: bool) -> Self {
        CueEvent { kind, detected }
    }

    pub fn precision(&self) -> f64 {
        self.kind.precision()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub feature: Feature,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureBelief {
    /// Log-odds per feature, indexed by [`Feature`] order.
    pub log_odds: [f64; 4],
    pub activated: bool,
}

impl FeatureBelief {
    /// Every feature at probability 0.5, not activated.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn p(&self, f: Feature) -> f64 {
        1.0 / (1.0 + (-self.log_odds[f.slot()]).exp())
    }

    fn establishes(&self) -> bool {
        [Feature::Intersection, Feature::Left, Feature::Right]
            .iter()
            .any(|&f| self.p(f) > ACTIVATION_THRESHOLD)
    }
}

/// Messages produced by one cue observation.
pub fn message_for_cue(cue: &CueEvent, beliefs: &FeatureBelief) -> Vec<Message> {
    let live = cue.detected && (beliefs.activated || cue.kind.establishes_intersection());
    cue.kind
        .edges()
        .iter()
        .map(|&(feature, rel)| {
            let mu = match (live, rel) {
                (false, _) => NEUTRAL,
                (true, Relation::Supports) => cue.precision(),
                (true, Relation::Excludes) => 1.0 - cue.precision(),
            };
            Message { feature, mu }
        })
        .collect()
}

/// All messages for one time step: per-cue messages plus, once activated and within the
/// dissent radius, a weak dissent for each direction that no live cue supported this step.
/// `distance_m` is the current estimate of the distance to the intersection, if any.
pub fn step_messages(cues: &[CueEvent], beliefs: &FeatureBelief, distance_m: Option<f64>) -> Vec<Message> {
    let mut out = Vec::new();
    let mut supported = [false; 4];
    for cue in cues {
        for m in message_for_cue(cue, beliefs) {
            if m.mu > NEUTRAL {
                supported[m.feature.slot()] = true;
            }
            out.push(m);
        }
    }
    if beliefs.activated && distance_m.is_some_and(|d| d <= DISSENT_RADIUS_M) {
        for f in Feature::DIRECTIONS {
            if !supported[f.slot()] {
                out.push(Message { feature: f, mu: DISSENT });
            }
        }
    }
    out
}

/// Multiplies messages into the beliefs and latches activation.
pub fn propagate(beliefs: &FeatureBelief, messages: &[Message]) -> Result<FeatureBelief> {
    let mut next = *beliefs;
    for m in messages {
        if !(m.mu > 0.0 && m.mu < 1.0) {
            return Err(Error::SaturatedMessage(m.mu));
        }
        next.log_odds[m.feature.slot()] += (m.mu / (1.0 - m.mu)).ln();
    }
    next.activated = next.activated || next.establishes();
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn detected(kind: CueKind) -> CueEvent {
        CueEvent::new(kind, true)
    }

    fn activated() -> FeatureBelief {
        FeatureBelief { activated: true, ..FeatureBelief::new() }
    }

    /// Normalized product of a message history for one feature, computed directly.
    fn product_oracle(mus: &[f64]) -> f64 {
        let (mut on, mut off) = (1.0f64, 1.0f64);
        let (mut log_on, mut log_off) = (0.0f64, 0.0f64);
        for &m in mus {
            on *= m;
            off *= 1.0 - m;
            if on < 1e-200 || off < 1e-200 {
                log_on += on.ln();
                log_off += off.ln();
                on = 1.0;
                off = 1.0;
            }
        }
        let lo = (log_on + on.ln()) - (log_off + off.ln());
        1.0 / (1.0 + (-lo).exp())
    }

    #[test]
    fn light_and_stop_sign_establish_intersection() {
        let b = FeatureBelief::new();
        let msgs: Vec<Message> = [detected(CueKind::TrafficLight), detected(CueKind::StopSign)]
            .iter()
            .flat_map(|c| message_for_cue(c, &b))
            .collect();
        let post = propagate(&b, &msgs).unwrap();
        let expected = (0.95 * 0.97) / (0.95 * 0.97 + 0.05 * 0.03);
        assert!((post.p(Feature::Intersection) - expected).abs() < 1e-12);
        assert!((post.p(Feature::Intersection) - 0.99838).abs() < 1e-5);
        assert!(post.activated);
    }

    #[test]
    fn one_way_sign_excludes_against_neutral_prior() {
        let b = activated();
        let post = propagate(&b, &message_for_cue(&detected(CueKind::OneWayRight), &b)).unwrap();
        assert!((post.p(Feature::Left) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn undetected_cue_is_neutral() {
        let b = activated();
        for kind in CueKind::ALL {
            let msgs = message_for_cue(&CueEvent::new(kind, false), &b);
            assert!(msgs.iter().all(|m| m.mu == NEUTRAL));
            assert_eq!(propagate(&b, &msgs).unwrap(), b);
        }
    }

    #[test]
    fn direction_cues_are_gated_before_activation() {
        let b = FeatureBelief::new();
        for kind in [
            CueKind::CrossTrafficRight,
            CueKind::ParkedCarLeft,
            CueKind::Lanes,
            CueKind::OncomingOutgoing,
            CueKind::OneWayRight,
            CueKind::DoNotEnter,
            CueKind::RoadStraight,
        ] {
            let post = propagate(&b, &message_for_cue(&detected(kind), &b)).unwrap();
            assert_eq!(post.log_odds, [0.0; 4], "{kind:?} leaked before activation");
        }
        let post = propagate(&b, &message_for_cue(&detected(CueKind::CrossTrafficRight), &activated())).unwrap();
        assert!(post.p(Feature::Right) > 0.5);
    }

    #[test]
    fn side_road_surfaces_can_activate() {
        let mut b = FeatureBelief::new();
        for _ in 0..2 {
            b = propagate(&b, &message_for_cue(&detected(CueKind::RoadLeft), &b)).unwrap();
        }
        assert!(b.p(Feature::Left) > 0.9);
        assert!(b.activated);
    }

    #[test]
    fn dissent_only_near_and_after_activation() {
        let cues = [detected(CueKind::RoadRight)];
        let far = step_messages(&cues, &activated(), Some(25.0));
        assert!(far.iter().all(|m| m.mu != DISSENT));
        assert!(step_messages(&cues, &FeatureBelief::new(), Some(5.0)).iter().all(|m| m.mu != DISSENT));
        assert!(step_messages(&cues, &activated(), None).iter().all(|m| m.mu != DISSENT));
        let near = step_messages(&cues, &activated(), Some(20.0));
        let dissent: Vec<Feature> = near.iter().filter(|m| m.mu == DISSENT).map(|m| m.feature).collect();
        assert_eq!(dissent, vec![Feature::Left, Feature::Straight]);
    }

    #[test]
    fn exclusion_dominates_one_support() {
        let b = activated();
        let msgs = [Message { feature: Feature::Left, mu: 0.77 }, Message { feature: Feature::Left, mu: 0.05 }];
        assert!(propagate(&b, &msgs).unwrap().p(Feature::Left) < 0.5);
    }

    #[test]
    fn saturated_messages_are_rejected() {
        let b = FeatureBelief::new();
        for mu in [0.0, 1.0] {
            let r = propagate(&b, &[Message { feature: Feature::Left, mu }]);
            assert!(matches!(r, Err(Error::SaturatedMessage(_))));
        }
    }

    #[test]
    fn neutral_stream_is_bit_exact() {
        let mut b = FeatureBelief::new();
        let msgs: Vec<Message> = Feature::ALL.iter().map(|&f| Message { feature: f, mu: NEUTRAL }).collect();
        for _ in 0..10_000 {
            b = propagate(&b, &msgs).unwrap();
        }
        assert_eq!(b.log_odds, [0.0; 4]);
        assert!(Feature::ALL.iter().all(|&f| b.p(f) == 0.5));
    }

    #[test]
    fn log_odds_match_direct_product() {
        let mut rng = rng_from(5);
        for _ in 0..50 {
            let len = rng.random_range(1..2000);
            let mus: Vec<f64> = (0..len).map(|_| rng.random_range(0.02..0.98)).collect();
            let msgs: Vec<Message> = mus.iter().map(|&mu| Message { feature: Feature::Right, mu }).collect();
            let b = propagate(&FeatureBelief::new(), &msgs).unwrap();
            assert!((b.p(Feature::Right) - product_oracle(&mus)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn messages_move_beliefs_monotonically(lo in -5.0f64..5.0, mu in 0.01f64..0.99) {
            let b = FeatureBelief { log_odds: [lo; 4], activated: true };
            let post = propagate(&b, &[Message { feature: Feature::Straight, mu }]).unwrap();
            let (before, after) = (b.p(Feature::Straight), post.p(Feature::Straight));
            if mu > 0.5 {
                prop_assert!(after > before);
            } else if mu < 0.5 {
                prop_assert!(after < before);
            }
        }
    }
}
