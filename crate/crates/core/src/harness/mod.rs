//! Trials, Monte Carlo studies, statistics and persistence.
//!
//! A trial generates a city, drops the vehicle at a start intersection and runs the
//! sense, estimate, decide, steer loop until the goal is reached, the position ellipse grows
//! past the lost threshold, or time runs out. Studies repeat trials over grids of
//! configurations with per-trial seeds derived from a master seed.

mod config;
mod output;
mod scene;
mod stats;
mod study;
mod trial;

pub use config::{Config, LandmarkStudyConfig, RangeStudyConfig, ScenarioConfig, ScenePerception, SceneStudyConfig};
pub use output::{read_jsonl, read_trials, write_csv, write_json, write_jsonl, write_trials, TRIALS_HEADER};
pub use scene::{
    node_scene, random_intersection, random_non_intersection, run_approach, run_scene_study, summarize_scenes, trace_approach,
    ApproachRecord, SceneSummary,
};
pub use stats::{bootstrap_prob_less, distance_buckets, mean, pav_nonincreasing, percentile, success_range, summarize, Bucket, Summary};
pub use study::{
    landmark_cells, map_jobs, paired_detour_ratio, range_cell, run_cells, run_landmark_study, run_range_study, run_route,
    straight_route, trial_seed, zigzag_route, BucketRow, CellKey, LandmarkRow, LandmarkStudy, RangeRow, RouteRecord,
    StudyTable,
};
pub use trial::{build_scenario, run_trial, simulate, Outcome, Scenario, TrialMode, TrialRecord, TrialTrace};
