//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Result, StereoError};
use crate::rng::{RandomSeed, Stream};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k` rows of length `d`.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from every point to its assigned centroid.
    pub cost: f64,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Cost of a given assignment.
pub fn assignment_cost(points: &[&[f64]], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

/// Means of the assigned points; a cluster without points keeps `previous`.
pub(crate) fn cluster_means(
    points: &[&[f64]],
    assignments: &[usize],
    previous: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let d = previous.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, c), prev)| {
            if c == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / c as f64).collect()
            }
        })
        .collect()
}

fn plus_plus_init<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding leaving the tail on an already chosen point
            while dist[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let mut assignments = Vec::new();
    let mut last_cost = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        assignments = points.iter().map(|p| nearest(p, &centroids)).collect();
        let updated = cluster_means(points, &assignments, &centroids);
        let cost = assignment_cost(points, &assignments, &updated);
        debug_assert!(
            cost <= last_cost + 1e-9 * last_cost.abs().max(1.0),
            "k-means cost increased from {last_cost} to {cost}"
        );
        last_cost = cost;
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    let cost = assignment_cost(points, &assignments, &centroids);
    KMeansResult {
        assignments,
        centroids,
        cost,
    }
}

/// k-means over a set of points. The best of `restarts` seeded runs by cost
/// is returned; equal costs go to the earliest restart.
pub fn kmeans_points(
    points: &[&[f64]],
    k: usize,
    restarts: usize,
    seed: RandomSeed,
) -> Result<KMeansResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(StereoError::parameter(format!(
            "k = {k} must lie in 1..={n}"
        )));
    }
    if restarts == 0 {
        return Err(StereoError::parameter("k-means needs at least one restart"));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let mut rng = seed.derive(r as u64).rng(Stream::KMeans);
        let run = lloyd(points, plus_plus_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means on all feature columns of `table`. Select the geometric columns
/// first if the table carries others.
pub fn kmeans(
    table: &DataTable,
    k: usize,
    restarts: usize,
    seed: RandomSeed,
) -> Result<KMeansResult> {
    let points: Vec<&[f64]> = table.rows().collect();
    kmeans_points(&points, k, restarts, seed)
}
