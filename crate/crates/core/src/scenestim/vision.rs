//! Cue classifiers over pre-extracted segmentation records.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentClass {
    TrafficLight,
    StopSign,
    Car,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn y_center(&self) -> f64 {
        0.5 * (self.y_min + self.y_max)
    }
}

/// One segmented object in one camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentObs {
    pub frame: u64,
    pub class: SegmentClass,
    pub score: f64,
    pub bbox: BBox,
    pub height_px: f64,
    pub left_end_height_px: f64,
    pub right_end_height_px: f64,
    pub area_px: f64,
    pub x_center_px: f64,
    pub image_width_px: f64,
}

/// Minimum detector score for car segments.
const CAR_SCORE: f64 = 0.95;
/// Minimum length-to-height ratio: side profiles only.
const CAR_RATIO: f64 = 2.0;
/// Maximum relative size difference for a frame-to-frame match.
const MATCH_AREA: f64 = 0.03;
/// Maximum position difference for a match, as a fraction of image width.
const MATCH_X: f64 = 0.05;
/// Displacement below this fraction of the image width counts as stationary.
const STILL_X: f64 = 0.005;

fn usable_car(o: &SegmentObs) -> bool {
    o.class == SegmentClass::Car && o.score > CAR_SCORE && o.bbox.height() > 0.0 && o.bbox.width() / o.bbox.height() > CAR_RATIO
}

fn same_object(a: &SegmentObs, b: &SegmentObs) -> bool {
    let larger = a.area_px.max(b.area_px);
    larger > 0.0
        && (a.area_px - b.area_px).abs() / larger < MATCH_AREA
        && (a.x_center_px - b.x_center_px).abs() < MATCH_X * b.image_width_px
}

/// Cross-traffic flags `(right, left)` from cars that move horizontally between two frames.
pub fn track_cross_traffic(prev: &[SegmentObs], cur: &[SegmentObs]) -> (bool, bool) {
    let (mut right, mut left) = (false, false);
    for c in cur.iter().filter(|o| usable_car(o)) {
        for p in prev.iter().filter(|o| usable_car(o)) {
            if !same_object(p, c) {
                continue;
            }
            let dx = c.x_center_px - p.x_center_px;
            let dy = c.bbox.y_center() - p.bbox.y_center();
            if dx.abs() < STILL_X * c.image_width_px || dy.abs() >= dx.abs() {
                continue;
            }
            if dx > 0.0 {
                right = true;
            } else {
                left = true;
            }
        }
    }
    (right, left)
}

/// Parked-car orientation flags `(right, left)` for one car seen in two frames. The lower end
/// of the silhouette is taken as the nose.
pub fn classify_parked_car(prev: &SegmentObs, cur: &SegmentObs) -> (bool, bool) {
    if !(usable_car(prev) && usable_car(cur) && same_object(prev, cur)) {
        return (false, false);
    }
    let still = STILL_X * cur.image_width_px;
    if (cur.x_center_px - prev.x_center_px).abs() >= still || (cur.bbox.y_center() - prev.bbox.y_center()).abs() >= still {
        return (false, false);
    }
    let (l, r) = (cur.left_end_height_px, cur.right_end_height_px);
    (r < l, l < r)
}

/// Binary road-surface mask, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadMask {
    pub width: usize,
    pub height: usize,
    pub road: Vec<bool>,
}

impl RoadMask {
    pub fn new(width: usize, height: usize) -> Self {
        RoadMask { width, height, road: vec![false; width * height] }
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.road[y * self.width + x] = v;
    }

    fn get(&self, x: usize, y: usize) -> bool {
        self.road[y * self.width + x]
    }
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadCues {
    pub right: bool,
    pub straight: bool,
    pub left: bool,
}

/// Road fraction above this threshold marks a direction as present.
pub const ROAD_FRACTION: f64 = 0.2;

fn road_fraction(mask: &RoadMask, roi: &Roi) -> Result<f64> {
    if roi.width == 0 || roi.height == 0 {
        return Err(Error::config("empty region of interest"));
    }
    if roi.x + roi.width > mask.width || roi.y + roi.height > mask.height {
        return Err(Error::config("region of interest outside the mask"));
    }
    let mut count = 0usize;
    for y in roi.y..roi.y + roi.height {
        for x in roi.x..roi.x + roi.width {
            count += mask.get(x, y) as usize;
        }
    }
    Ok(count as f64 / (roi.width * roi.height) as f64)
}

/// Road directions from regions of interest ordered right, straight, left.
pub fn classify_road_rois(mask: &RoadMask, rois: &[Roi; 3]) -> Result<RoadCues> {
    let f = |i: usize| road_fraction(mask, &rois[i]).map(|v| v > ROAD_FRACTION);
    Ok(RoadCues { right: f(0)?, straight: f(1)?, left: f(2)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, area: f64, ratio: f64, score: f64) -> SegmentObs {
        let h = 40.0;
        let w = ratio * h;
        SegmentObs {
            frame: 0,
            class: SegmentClass::Car,
            score,
            bbox: BBox { x_min: x - w / 2.0, y_min: 300.0, x_max: x + w / 2.0, y_max: 300.0 + h },
            height_px: h,
            left_end_height_px: 30.0,
            right_end_height_px: 30.0,
            area_px: area,
            x_center_px: x,
            image_width_px: 1232.0,
        }
    }

    #[test]
    fn cross_traffic_moving_right() {
        let prev = [car(400.0, 1000.0, 2.5, 0.97)];
        let cur = [car(430.0, 1025.0, 2.5, 0.97)];
        assert_eq!(track_cross_traffic(&prev, &cur), (true, false));
        assert_eq!(track_cross_traffic(&cur, &prev), (false, true));
    }

    #[test]
    fn size_change_breaks_the_match() {
        let prev = [car(400.0, 1000.0, 2.5, 0.97)];
        let cur = [car(430.0, 1100.0, 2.5, 0.97)];
        assert_eq!(track_cross_traffic(&prev, &cur), (false, false));
    }

    #[test]
    fn front_profiles_and_weak_scores_are_ignored() {
        let prev = [car(400.0, 1000.0, 1.5, 0.97)];
        let cur = [car(430.0, 1000.0, 1.5, 0.97)];
        assert_eq!(track_cross_traffic(&prev, &cur), (false, false));
        let prev = [car(400.0, 1000.0, 2.5, 0.9)];
        let cur = [car(430.0, 1000.0, 2.5, 0.9)];
        assert_eq!(track_cross_traffic(&prev, &cur), (false, false));
    }

    #[test]
    fn stationary_car_is_not_traffic() {
        let prev = [car(400.0, 1000.0, 2.5, 0.97)];
        let cur = [car(403.0, 1000.0, 2.5, 0.97)];
        assert_eq!(track_cross_traffic(&prev, &cur), (false, false));
    }

    #[test]
    fn parked_car_nose_is_the_lower_end() {
        let mut a = car(400.0, 1000.0, 2.5, 0.97);
        a.left_end_height_px = 60.0;
        a.right_end_height_px = 80.0;
        assert_eq!(classify_parked_car(&a, &a), (false, true));
        let mut b = a;
        b.left_end_height_px = 80.0;
        b.right_end_height_px = 60.0;
        assert_eq!(classify_parked_car(&b, &b), (true, false));
        let c = car(400.0, 1000.0, 2.5, 0.97);
        assert_eq!(classify_parked_car(&c, &c), (false, false));
        let mut moving = a;
        moving.x_center_px += 30.0;
        assert_eq!(classify_parked_car(&a, &moving), (false, false));
    }

    fn mask_with(rows: &[(Roi, usize)]) -> RoadMask {
        let mut m = RoadMask::new(300, 10);
        for (roi, count) in rows {
            let mut left = *count;
            for y in roi.y..roi.y + roi.height {
                for x in roi.x..roi.x + roi.width {
                    if left > 0 {
                        m.set(x, y, true);
                        left -= 1;
                    }
                }
            }
        }
        m
    }

    fn rois() -> [Roi; 3] {
        [
            Roi { x: 200, y: 0, width: 10, height: 10 },
            Roi { x: 100, y: 0, width: 10, height: 10 },
            Roi { x: 0, y: 0, width: 10, height: 10 },
        ]
    }

    #[test]
    fn road_threshold_is_strict() {
        let r = rois();
        let m = mask_with(&[(r[0], 21), (r[1], 20), (r[2], 0)]);
        assert_eq!(classify_road_rois(&m, &r).unwrap(), RoadCues { right: true, straight: false, left: false });
    }

    #[test]
    fn three_way_pattern() {
        let r = rois();
        let m = mask_with(&[(r[0], 60), (r[1], 5), (r[2], 45)]);
        assert_eq!(classify_road_rois(&m, &r).unwrap(), RoadCues { right: true, straight: false, left: true });
    }

    #[test]
    fn empty_roi_is_a_config_error() {
        let mut r = rois();
        r[1].width = 0;
        assert!(matches!(classify_road_rois(&RoadMask::new(300, 10), &r), Err(Error::Config(_))));
    }
}
