//! Fair clustering through (1,1)-fairlets.
//!
//! Every minority point is paired with a majority point by greedy
//! nearest matching: all cross-group pairs are sorted by distance and taken
//! in order whenever both endpoints are still free. The last greedy pairs
//! tend to be long, so the matching is then improved by exchanging partners
//! between two pairs whenever that lowers the summed squared distance. The
//! result approximates the min-cost matching of the fairlet construction
//! without solving it exactly. The pair midpoints are
//! clustered with k-means and both members of a pair inherit the cluster of
//! their midpoint, so each cluster holds equally many points of each group.

use log::warn;

use super::kmeans::{
    assignment_cost, cluster_means, kmeans_points, nearest, sq_dist, KMeansResult,
};
use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::rng::RandomSeed;

/// Largest tolerated group-size difference, as a fraction of the larger
/// group. Smaller differences leave unmatched points, which are assigned to
/// their nearest centroid.
pub const MAX_IMBALANCE: f64 = 0.05;

/// Upper bound on partner-exchange sweeps over all pairs of fairlets.
pub const MAX_SWAP_PASSES: usize = 50;

/// Greedy (minority, majority) row pairs in order of increasing distance.
pub fn greedy_fairlets(table: &DataTable) -> Vec<(usize, usize)> {
    let minority = table.indices_of(Group::Minority);
    let majority = table.indices_of(Group::Majority);
    let mut pairs = Vec::with_capacity(minority.len() * majority.len());
    for &i in &minority {
        for &j in &majority {
            pairs.push((sq_dist(table.row(i), table.row(j)), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; table.n_rows()];
    let mut out = Vec::with_capacity(minority.len().min(majority.len()));
    for (_, i, j) in pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Greedy pairs refined by partner exchanges until no exchange helps.
/// Each fairlet's k-means cost is half its squared length, so the summed
/// squared length is the quantity being lowered.
pub fn fairlet_decomposition(table: &DataTable) -> Vec<(usize, usize)> {
    let mut pairs = greedy_fairlets(table);
    let d = |i: usize, j: usize| sq_dist(table.row(i), table.row(j));
    for _ in 0..MAX_SWAP_PASSES {
        let mut improved = false;
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                let ((i, j), (k, l)) = (pairs[a], pairs[b]);
                let current = d(i, j) + d(k, l);
                let swapped = d(i, l) + d(k, j);
                if swapped < current - 1e-12 * current.max(1.0) {
                    pairs[a] = (i, l);
                    pairs[b] = (k, j);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    pairs
}

pub fn fairlet_kmeans(
    table: &DataTable,
    k: usize,
    restarts: usize,
    seed: RandomSeed,
) -> Result<KMeansResult> {
    table.require_both_groups()?;
    let m = table.count_of(Group::Minority);
    let big = table.count_of(Group::Majority);
    let gap = m.abs_diff(big);
    if gap as f64 > MAX_IMBALANCE * m.max(big) as f64 && gap > 1 {
        return Err(StereoError::parameter(format!(
            "fairlets need near-equal groups, got {m} minority and {big} majority rows"
        )));
    }
    let fairlets = fairlet_decomposition(table);
    if k > fairlets.len() {
        return Err(StereoError::parameter(format!(
            "k = {k} exceeds the {} fairlets",
            fairlets.len()
        )));
    }
    if gap > 0 {
        warn!("{gap} rows have no fairlet partner and join their nearest cluster");
    }
    let centers: Vec<Vec<f64>> = fairlets
        .iter()
        .map(|&(i, j)| {
            table
                .row(i)
                .iter()
                .zip(table.row(j))
                .map(|(a, b)| (a + b) / 2.0)
                .collect()
        })
        .collect();
    let center_refs: Vec<&[f64]> = centers.iter().map(Vec::as_slice).collect();
    let inner = kmeans_points(&center_refs, k, restarts, seed)?;

    let mut assignments = vec![usize::MAX; table.n_rows()];
    for (&(i, j), &a) in fairlets.iter().zip(&inner.assignments) {
        assignments[i] = a;
        assignments[j] = a;
    }
    for (r, a) in assignments.iter_mut().enumerate() {
        if *a == usize::MAX {
            *a = nearest(table.row(r), &inner.centroids);
        }
    }
    let points: Vec<&[f64]> = table.rows().collect();
    let centroids = cluster_means(&points, &assignments, &inner.centroids);
    let cost = assignment_cost(&points, &assignments, &centroids);
    Ok(KMeansResult {
        assignments,
        centroids,
        cost,
    })
}
