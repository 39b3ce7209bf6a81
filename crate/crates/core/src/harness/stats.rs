//! Summary statistics over trial records.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trial::{Outcome, TrialRecord};
use crate::seed::rng_from;

/// Linear-interpolation percentile of unsorted data, `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Mean of the values summed in sorted order, so the result does not depend on input order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Weighted least-squares fit that is non-increasing in index (pool adjacent violators).
pub fn pav_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (v2, w2, n2) = blocks[blocks.len() - 1];
            let (v1, w1, n1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            let v = if w > 0.0 { (v1 * w1 + v2 * w2) / w } else { 0.5 * (v1 + v2) };
            blocks.push((v, w, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, n)| std::iter::repeat_n(v, n)).collect()
}

/// Success counts over one Euclidean distance bucket `[lo_m, hi_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo_m: f64,
    pub hi_m: f64,
    pub n: usize,
    pub reached: usize,
}

impl Bucket {
    pub fn success_rate(&self) -> Option<f64> {
        (self.n > 0).then(|| self.reached as f64 / self.n as f64)
    }
}

pub fn distance_buckets(records: &[TrialRecord], width_m: f64) -> Vec<Bucket> {
    let top = records.iter().map(|r| (r.euclidean_m / width_m).floor() as usize).max();
    let Some(top) = top else { return Vec::new() };
    let mut buckets: Vec<Bucket> = (0..=top)
        .map(|k| Bucket { lo_m: k as f64 * width_m, hi_m: (k + 1) as f64 * width_m, n: 0, reached: 0 })
        .collect();
    for r in records {
        let b = &mut buckets[(r.euclidean_m / width_m).floor() as usize];
        b.n += 1;
        b.reached += (r.outcome == Outcome::Reached) as usize;
    }
    buckets
}

/// Largest distance at which the success rate, fitted as non-increasing in distance, is still at
/// least `level`: the upper edge of the farthest qualifying bucket. Empty buckets carry no weight.
pub fn success_range(buckets: &[Bucket], level: f64) -> Option<f64> {
    let filled: Vec<&Bucket> = buckets.iter().filter(|b| b.n > 0).collect();
    let rates: Vec<f64> = filled.iter().map(|b| b.reached as f64 / b.n as f64).collect();
    let weights: Vec<f64> = filled.iter().map(|b| b.n as f64).collect();
    let fit = pav_nonincreasing(&rates, &weights);
    filled.iter().zip(&fit).filter(|(_, &f)| f >= level).map(|(b, _)| b.hi_m).last()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub reached: usize,
    pub lost: usize,
    pub timeout: usize,
    pub success_rate: Option<f64>,
    pub mean_manhattan_m: Option<f64>,
    pub mean_euclidean_m: Option<f64>,
    pub mean_final_axis_m: Option<f64>,
    pub p10_manhattan_m: Option<f64>,
    pub p50_manhattan_m: Option<f64>,
    pub p90_manhattan_m: Option<f64>,
    pub range_m: Option<f64>,
}

pub fn summarize(records: &[TrialRecord], bucket_m: f64, range_level: f64) -> Summary {
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let n = records.len();
    let reached = count(Outcome::Reached);
    let manhattan: Vec<f64> = records.iter().map(|r| r.manhattan_m).collect();
    let euclid: Vec<f64> = records.iter().map(|r| r.euclidean_m).collect();
    let axis: Vec<f64> = records.iter().map(|r| r.final_axis_m).collect();
    Summary {
        n,
        reached,
        lost: count(Outcome::Lost),
        timeout: count(Outcome::Timeout),
        success_rate: (n > 0).then(|| reached as f64 / n as f64),
        mean_manhattan_m: mean(&manhattan),
        mean_euclidean_m: mean(&euclid),
        mean_final_axis_m: mean(&axis),
        p10_manhattan_m: percentile(&manhattan, 10.0),
        p50_manhattan_m: percentile(&manhattan, 50.0),
        p90_manhattan_m: percentile(&manhattan, 90.0),
        range_m: success_range(&distance_buckets(records, bucket_m), range_level),
    }
}

/// Fraction of bootstrap resamples in which the mean of `a` is below the mean of `b`.
pub fn bootstrap_prob_less(a: &[f64], b: &[f64], reps: usize, seed: u64) -> f64 {
    if a.is_empty() || b.is_empty() || reps == 0 {
        return f64::NAN;
    }
    let mut rng = rng_from(seed);
    let resampled_mean = |v: &[f64], rng: &mut crate::seed::SimRng| {
        (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).sum::<f64>() / v.len() as f64
    };
    let wins = (0..reps)
        .filter(|_| {
            let ma = resampled_mean(a, &mut rng);
            let mb = resampled_mean(b, &mut rng);
            ma < mb
        })
        .count();
    wins as f64 / reps as f64
}
