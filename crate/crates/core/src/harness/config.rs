//! Scenario and study configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::citygen::MapParams;
use crate::estimator::{NoiseConfig, DEFAULT_LOST_THRESHOLD_M};
use crate::navigator::{NavigatorConfig, StrategyConfig, StrategyKind};
use crate::scenestim::{CueSimConfig, SceneConfig};
use crate::vehicle::{ControllerGains, VehicleParams};
use crate::{Error, Result};

/// Everything that defines one trial apart from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub map: MapParams,
    /// When set, each trial draws its map area uniformly from this range instead of `map.area_km2`.
    pub map_area_range_km2: Option<[f64; 2]>,
    /// Start/goal Euclidean distance band. Without it the lower bound is a quarter of the map
    /// diagonal and there is no upper bound.
    pub endpoint_distance_m: Option<[f64; 2]>,
    pub vehicle: VehicleParams,
    pub gains: ControllerGains,
    pub noise: NoiseConfig,
    pub navigator: NavigatorConfig,
    pub strategy: StrategyConfig,
    pub landmark_density_per_km2: f64,
    pub landmark_detection_rate: f64,
    pub landmark_sensing_radius_m: f64,
    /// A landmark targeted for more than this many decisions is given up.
    pub landmark_decision_cap: u32,
    pub lost_threshold_m: f64,
    pub initial_pos_sigma_m: f64,
    pub initial_heading_sigma: f64,
    /// Distance to the next intersection at which the exit is chosen.
    pub decide_radius_m: f64,
    /// Timeout as a multiple of the time needed to drive the start/goal distance at cruise speed.
    pub timeout_factor: f64,
    /// Explicit timeout in steps, overriding `timeout_factor`.
    pub timeout_steps: Option<u64>,
    /// When set, the exits offered at each intersection are those the scene estimator believes
    /// in rather than the ground truth.
    pub scene_perception: Option<ScenePerception>,
}

/// Scene estimation on the way into every intersection of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenePerception {
    pub start_distance_m: f64,
    pub step_m: f64,
    pub cues: CueSimConfig,
    pub scene: SceneConfig,
    /// An exit is offered when its direction's probability exceeds this.
    pub exit_threshold: f64,
}

impl Default for ScenePerception {
    fn default() -> Self {
        ScenePerception {
            start_distance_m: 80.0,
            step_m: 1.0,
            cues: CueSimConfig::default(),
            scene: SceneConfig::default(),
            exit_threshold: 0.5,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            map: MapParams::default(),
            map_area_range_km2: Some([1.0, 100.0]),
            endpoint_distance_m: None,
            vehicle: VehicleParams::default(),
            gains: ControllerGains::default(),
            noise: NoiseConfig::default(),
            navigator: NavigatorConfig::default(),
            strategy: StrategyConfig::default(),
            landmark_density_per_km2: 1.0,
            landmark_detection_rate: 0.6,
            landmark_sensing_radius_m: 25.0,
            landmark_decision_cap: 12,
            lost_threshold_m: DEFAULT_LOST_THRESHOLD_M,
            initial_pos_sigma_m: 1.0,
            initial_heading_sigma: 1f64.to_radians(),
            decide_radius_m: 30.0,
            timeout_factor: 4.0,
            timeout_steps: None,
            scene_perception: None,
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(msg))
    }
}

fn check_band(band: Option<[f64; 2]>, what: &str) -> Result<()> {
    match band {
        Some([lo, hi]) => check(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi, what),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.vehicle.validate()?;
        self.noise.validate()?;
        self.navigator.validate()?;
        self.strategy.validate()?;
        check_band(self.map_area_range_km2, "map area range must be an ordered pair of nonnegative values")?;
        for area in self.map_area_range_km2.into_iter().flatten() {
            MapParams { area_km2: area, ..self.map }.validate()?;
        }
        check_band(self.endpoint_distance_m, "endpoint distance band must be an ordered pair of nonnegative values")?;
        check(self.landmark_density_per_km2 >= 0.0, "landmark density must be nonnegative")?;
        check((0.0..=1.0).contains(&self.landmark_detection_rate), "landmark detection rate must lie in [0, 1]")?;
        check(self.landmark_sensing_radius_m > 0.0, "landmark sensing radius must be positive")?;
        check(self.lost_threshold_m > 0.0, "lost threshold must be positive")?;
        check(self.initial_pos_sigma_m >= 0.0 && self.initial_heading_sigma >= 0.0, "initial sigmas must be nonnegative")?;
        check(self.decide_radius_m > 0.0, "decision radius must be positive")?;
        check(self.timeout_factor > 0.0, "timeout factor must be positive")?;
        check(self.timeout_steps != Some(0), "timeout steps must be positive")?;
        if let Some(sp) = &self.scene_perception {
            sp.cues.validate()?;
            check(sp.start_distance_m > 0.0 && sp.step_m > 0.0, "approach distance and step must be positive")?;
            check((0.0..1.0).contains(&sp.exit_threshold), "exit threshold must lie in [0, 1)")?;
        }
        Ok(())
    }
}

/// Compass uncertainty cases of the range study, as 2σ in degrees; `None` is no compass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeStudyConfig {
    pub compass_2sigma_deg: Vec<Option<f64>>,
    pub trials: usize,
    /// Odometer distance at which a trial that never got lost is stopped.
    pub cap_m: f64,
    pub map_area_km2: f64,
}

impl Default for RangeStudyConfig {
    fn default() -> Self {
        RangeStudyConfig {
            compass_2sigma_deg: vec![None, Some(10.0), Some(20.0), Some(30.0)],
            trials: 200,
            cap_m: 50_000.0,
            map_area_km2: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandmarkStudyConfig {
    pub strategies: Vec<StrategyKind>,
    pub densities_per_km2: Vec<f64>,
    pub detection_rates: Vec<f64>,
    pub trials: usize,
    pub bucket_m: f64,
    /// Success rate that defines a cell's range.
    pub range_success: f64,
}

impl Default for LandmarkStudyConfig {
    fn default() -> Self {
        LandmarkStudyConfig {
            strategies: StrategyKind::ALL.to_vec(),
            densities_per_km2: vec![0.25, 0.5, 1.0, 2.0, 10.0],
            detection_rates: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            trials: 700,
            bucket_m: 500.0,
            range_success: 0.8,
        }
    }
}

/// Simulated approaches for the scene estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneStudyConfig {
    pub approaches: usize,
    pub start_distance_m: f64,
    pub step_m: f64,
    /// Approaches to intersections must offer at least this many cue kinds.
    pub min_cue_classes: usize,
    pub cues: CueSimConfig,
    pub scene: SceneConfig,
    pub present_threshold: f64,
}

impl Default for SceneStudyConfig {
    fn default() -> Self {
        SceneStudyConfig {
            approaches: 500,
            start_distance_m: 80.0,
            step_m: 1.0,
            min_cue_classes: 2,
            cues: CueSimConfig::default(),
            scene: SceneConfig::default(),
            present_threshold: 0.9,
        }
    }
}

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub range_study: RangeStudyConfig,
    pub landmark_study: LandmarkStudyConfig,
    pub scene_study: SceneStudyConfig,
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let r = &self.range_study;
        check(r.cap_m > 0.0 && r.map_area_km2 > 0.0, "range study cap and map area must be positive")?;
        check(
            r.compass_2sigma_deg.iter().flatten().all(|d| (0.0..180.0).contains(d)),
            "compass cases must lie in [0, 180) degrees",
        )?;
        let l = &self.landmark_study;
        check(l.bucket_m > 0.0, "bucket width must be positive")?;
        check((0.0..=1.0).contains(&l.range_success), "range success level must lie in [0, 1]")?;
        check(l.densities_per_km2.iter().all(|d| *d >= 0.0), "landmark densities must be nonnegative")?;
        check(l.detection_rates.iter().all(|r| (0.0..=1.0).contains(r)), "detection rates must lie in [0, 1]")?;
        let s = &self.scene_study;
        s.cues.validate()?;
        check(s.start_distance_m > 0.0 && s.step_m > 0.0, "approach distance and step must be positive")?;
        check(s.min_cue_classes <= crate::scenestim::CueKind::ALL.len(), "too many required cue classes")?;
        Ok(())
    }
}
