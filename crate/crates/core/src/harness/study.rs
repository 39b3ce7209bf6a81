//! Monte Carlo studies over grids of scenario variants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LandmarkStudyConfig, RangeStudyConfig, ScenarioConfig};
use super::stats::{distance_buckets, summarize, Bucket};
use super::trial::{simulate, TrialMode, TrialRecord};
use crate::estimator::{ellipse_major_axis, predict, update_compass, PoseBelief};
use crate::geom::{wrap_angle, Vec2};
use crate::navigator::StrategyKind;
use crate::seed::{derive, rng_from};
use crate::vehicle::{advance_path, sample_slip, sense, step_bicycle, step_distance, PathFollower, VehicleState, PATH_CAPTURE_M};
use crate::{Error, Result};

/// Seed of trial `index` of a study: shared by every cell, so cells are compared on the same
/// cities, endpoints and noise streams.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive(&[master, index as u64])
}

/// Evaluates `f(0..n)` on `threads` workers, returning results in index order.
pub fn map_jobs<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Runs `trials` trials of each cell configuration. Cell order and trial order are preserved.
pub fn run_cells(cells: &[ScenarioConfig], master: u64, trials: usize, mode: TrialMode, threads: usize) -> Result<Vec<Vec<TrialRecord>>> {
    for c in cells {
        c.validate()?;
    }
    let flat = map_jobs(cells.len() * trials, threads, |job| {
        let (cell, trial) = (job / trials, job % trials);
        simulate(&cells[cell], trial_seed(master, trial), mode, false).map(|(r, _)| r)
    })?;
    let mut out: Vec<Vec<TrialRecord>> = Vec::with_capacity(cells.len());
    let mut it = flat.into_iter();
    for _ in cells {
        out.push(it.by_ref().take(trials).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    /// Empty when the vehicle has no compass.
    pub compass_2sigma_deg: Option<f64>,
    pub n: usize,
    pub lost: usize,
    pub timeout: usize,
    pub mean_manhattan_m: Option<f64>,
    pub p10_manhattan_m: Option<f64>,
    pub p50_manhattan_m: Option<f64>,
    pub p90_manhattan_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable<R> {
    pub rows: Vec<R>,
    pub trials: Vec<Vec<TrialRecord>>,
}

/// Scenario of one compass case: no landmarks, fixed map size, distance driven until lost.
pub fn range_cell(template: &ScenarioConfig, study: &RangeStudyConfig, compass_2sigma_deg: Option<f64>) -> ScenarioConfig {
    let mut c = template.clone();
    c.noise.compass_2sigma = compass_2sigma_deg.map(f64::to_radians);
    c.landmark_density_per_km2 = 0.0;
    c.map.area_km2 = study.map_area_km2;
    c.map_area_range_km2 = None;
    c.endpoint_distance_m = None;
    c
}

/// Distance driven before getting lost, per compass case.
pub fn run_range_study(template: &ScenarioConfig, study: &RangeStudyConfig, threads: usize) -> Result<StudyTable<RangeRow>> {
    let cells: Vec<ScenarioConfig> = study.compass_2sigma_deg.iter().map(|&c| range_cell(template, study, c)).collect();
    let trials = run_cells(&cells, template.seed, study.trials, TrialMode::Range { cap_m: study.cap_m }, threads)?;
    let rows = study
        .compass_2sigma_deg
        .iter()
        .zip(&trials)
        .map(|(&case, recs)| {
            let s = summarize(recs, 500.0, 0.8);
            RangeRow {
                compass_2sigma_deg: case,
                n: s.n,
                lost: s.lost,
                timeout: s.timeout,
                mean_manhattan_m: s.mean_manhattan_m,
                p10_manhattan_m: s.p10_manhattan_m,
                p50_manhattan_m: s.p50_manhattan_m,
                p90_manhattan_m: s.p90_manhattan_m,
            }
        })
        .collect();
    Ok(StudyTable { rows, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub strategy: StrategyKind,
    pub density_index: usize,
    pub rate_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRow {
    pub strategy: StrategyKind,
    pub density_per_km2: f64,
    pub detection_rate: f64,
    pub n: usize,
    pub reached: usize,
    pub lost: usize,
    pub timeout: usize,
    pub success_rate: Option<f64>,
    pub mean_manhattan_m: Option<f64>,
    pub mean_euclidean_m: Option<f64>,
    /// Euclidean range with the configured success rate.
    pub range_m: Option<f64>,
}

/// One line of the per-cell distance breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub strategy: StrategyKind,
    pub density_per_km2: f64,
    pub detection_rate: f64,
    pub lo_m: f64,
    pub hi_m: f64,
    pub n: usize,
    pub reached: usize,
    pub success_rate: Option<f64>,
}

/// Cells in strategy-major, then density, then rate order.
pub fn landmark_cells(template: &ScenarioConfig, study: &LandmarkStudyConfig) -> Vec<(CellKey, ScenarioConfig)> {
    let mut out = Vec::new();
    for &strategy in &study.strategies {
        for (di, &density) in study.densities_per_km2.iter().enumerate() {
            for (ri, &rate) in study.detection_rates.iter().enumerate() {
                let mut c = template.clone();
                c.strategy.kind = strategy;
                c.landmark_density_per_km2 = density;
                c.landmark_detection_rate = rate;
                out.push((CellKey { strategy, density_index: di, rate_index: ri }, c));
            }
        }
    }
    out
}

pub struct LandmarkStudy {
    pub table: StudyTable<LandmarkRow>,
    pub keys: Vec<CellKey>,
    pub buckets: Vec<BucketRow>,
}

/// Success rate and range per strategy × density × detection rate cell.
pub fn run_landmark_study(template: &ScenarioConfig, study: &LandmarkStudyConfig, threads: usize) -> Result<LandmarkStudy> {
    let cells = landmark_cells(template, study);
    let configs: Vec<ScenarioConfig> = cells.iter().map(|c| c.1.clone()).collect();
    let trials = run_cells(&configs, template.seed, study.trials, TrialMode::ToGoal, threads)?;
    let mut rows = Vec::new();
    let mut buckets = Vec::new();
    for ((_, cfg), recs) in cells.iter().zip(&trials) {
        let s = summarize(recs, study.bucket_m, study.range_success);
        rows.push(LandmarkRow {
            strategy: cfg.strategy.kind,
            density_per_km2: cfg.landmark_density_per_km2,
            detection_rate: cfg.landmark_detection_rate,
            n: s.n,
            reached: s.reached,
            lost: s.lost,
            timeout: s.timeout,
            success_rate: s.success_rate,
            mean_manhattan_m: s.mean_manhattan_m,
            mean_euclidean_m: s.mean_euclidean_m,
            range_m: s.range_m,
        });
        for Bucket { lo_m, hi_m, n, reached } in distance_buckets(recs, study.bucket_m) {
            buckets.push(BucketRow {
                strategy: cfg.strategy.kind,
                density_per_km2: cfg.landmark_density_per_km2,
                detection_rate: cfg.landmark_detection_rate,
                lo_m,
                hi_m,
                n,
                reached,
                success_rate: (n > 0).then(|| reached as f64 / n as f64),
            });
        }
    }
    Ok(LandmarkStudy { table: StudyTable { rows, trials }, keys: cells.iter().map(|c| c.0).collect(), buckets })
}

/// Ratio of mean distance traveled by `a` over `b`, over the trials that both completed.
pub fn paired_detour_ratio(a: &[TrialRecord], b: &[TrialRecord]) -> Option<(f64, usize)> {
    use super::trial::Outcome::Reached;
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.seed == y.seed && x.outcome == Reached && y.outcome == Reached)
        .map(|(x, y)| (x.manhattan_m, y.manhattan_m))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let sa: f64 = pairs.iter().map(|p| p.0).sum();
    let sb: f64 = pairs.iter().map(|p| p.1).sum();
    Some((sa / sb, pairs.len()))
}

pub fn straight_route(length_m: f64) -> Vec<Vec2> {
    vec![Vec2::zeros(), Vec2::new(length_m, 0.0)]
}

/// Staircase of `legs` legs alternating east and north.
pub fn zigzag_route(legs: usize, leg_m: f64) -> Vec<Vec2> {
    let mut pts = vec![Vec2::zeros()];
    for k in 0..legs {
        let last = pts[k];
        let step = if k % 2 == 0 { Vec2::new(leg_m, 0.0) } else { Vec2::new(0.0, leg_m) };
        pts.push(last + step);
    }
    pts
}

/// Final state of a dead-reckoning drive along a fixed route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub seed: u64,
    pub manhattan_m: f64,
    pub final_axis_m: f64,
    pub turns: usize,
}

/// Drives `route` with odometry and compass only, without stopping when lost.
pub fn run_route(cfg: &ScenarioConfig, route: &[Vec2], seed: u64) -> Result<RouteRecord> {
    cfg.validate()?;
    if route.len() < 2 {
        return Err(Error::config("a route needs at least two vertices"));
    }
    let p = cfg.vehicle;
    let noise = &cfg.noise;
    let mut rng = rng_from(derive(&[seed, 0x70]));
    let heading = crate::geom::bearing(route[1] - route[0]);
    let mut truth = VehicleState::new(route[0].x, route[0].y, heading, 0.0);
    let (sp, sh) = (cfg.initial_pos_sigma_m, cfg.initial_heading_sigma);
    let cov = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(sp * sp, sp * sp, sh * sh));
    let mut b = PoseBelief::new(truth.x, truth.y, truth.theta, cov);
    let mut path = route.to_vec();
    let mut follower = PathFollower::new(cfg.gains);
    let length: f64 = route.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let max_steps = (cfg.timeout_factor * length / p.v_cruise / p.dt_s).ceil() as u64;
    let end = *route.last().expect("nonempty route");
    let mut manhattan = 0.0;
    let compass_every = noise.compass_period_steps(p.dt_s);
    for step in 1..=max_steps {
        let u = follower.command(&truth, &path, &p).saturate(&p);
        let arc = step_distance(truth.v, u.accel, p.dt_s);
        let slip = sample_slip(arc, noise, &mut rng);
        let mut next = step_bicycle(&truth, u, &p);
        next.theta = wrap_angle(next.theta + slip.yaw_err);
        let sensor_noise = if step % compass_every == 0 { *noise } else { noise.without_compass() };
        let r = sense(&truth, &next, arc, slip, &sensor_noise, &mut rng);
        truth = next;
        manhattan += arc;
        b = predict(&b, r.odo_distance, r.odo_distance * u.steer / p.wheelbase_m, noise);
        if let (Some(z), Some(sigma)) = (r.compass, noise.compass_sigma()) {
            b = update_compass(&b, z, sigma);
        }
        advance_path(&mut path, truth.pos(), PATH_CAPTURE_M);
        if path.len() == 2 && (truth.pos() - end).norm() < PATH_CAPTURE_M {
            break;
        }
    }
    Ok(RouteRecord { seed, manhattan_m: manhattan, final_axis_m: ellipse_major_axis(&b), turns: route.len() - 2 })
}
