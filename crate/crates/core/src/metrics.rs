//! Harm and quality measures: per-group outcomes, partition agreement,
//! clustering balance and cost, and the group KL divergence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::error::{Result, StereoError};
use crate::transforms::{compute_lambda, TypeDistribution};

/// Values at or above this count as a positive selection.
pub const SELECTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub total: usize,
    pub selected: usize,
    pub rate: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcomeReport {
    pub minority: GroupOutcome,
    pub majority: GroupOutcome,
    /// Minority rate minus majority rate.
    pub rate_disparity: f64,
    /// Minority mean minus majority mean.
    pub mean_disparity: f64,
}

/// Per-group selection counts and mean values of labels or predictions.
pub fn selection_report(values: &[f64], groups: &[Group]) -> Result<GroupOutcomeReport> {
    if values.len() != groups.len() {
        return Err(StereoError::structural(format!(
            "{} values for {} group entries",
            values.len(),
            groups.len()
        )));
    }
    let outcome = |g: Group| -> Result<GroupOutcome> {
        let vals: Vec<f64> = values
            .iter()
            .zip(groups)
            .filter(|(_, &h)| h == g)
            .map(|(v, _)| *v)
            .collect();
        if vals.is_empty() {
            return Err(StereoError::structural(format!(
                "group {} is empty",
                g.as_u8()
            )));
        }
        let selected = vals.iter().filter(|&&v| v >= SELECTION_THRESHOLD).count();
        Ok(GroupOutcome {
            total: vals.len(),
            selected,
            rate: selected as f64 / vals.len() as f64,
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
        })
    };
    let minority = outcome(Group::Minority)?;
    let majority = outcome(Group::Majority)?;
    Ok(GroupOutcomeReport {
        minority,
        majority,
        rate_disparity: minority.rate - majority.rate,
        mean_disparity: minority.mean - majority.mean,
    })
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

struct Contingency {
    cells: Vec<u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(StereoError::structural("partitions have different lengths"));
    }
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    Ok(Contingency {
        cells: cells.into_values().collect(),
        rows: rows.into_values().collect(),
        cols: cols.into_values().collect(),
        n: a.len() as u64,
    })
}

/// Hubert–Arabie adjusted rand index. Two trivial partitions (both a single
/// cluster, or both all singletons) agree perfectly and score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: f64 = t.cells.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = t.rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = t.cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of point pairs on which the partitions agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let total = choose2(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let same_both: f64 = t.cells.iter().map(|&c| choose2(c)).sum();
    let same_a: f64 = t.rows.iter().map(|&c| choose2(c)).sum();
    let same_b: f64 = t.cols.iter().map(|&c| choose2(c)).sum();
    Ok((total + 2.0 * same_both - same_a - same_b) / total)
}

/// `min` over clusters of `min(r/b, b/r)`; a cluster missing either group
/// makes the balance 0.
pub fn balance(assignments: &[usize], groups: &[Group]) -> Result<f64> {
    if assignments.len() != groups.len() {
        return Err(StereoError::structural(
            "assignments and groups have different lengths",
        ));
    }
    if !groups.contains(&Group::Minority) || !groups.contains(&Group::Majority) {
        return Err(StereoError::structural("balance needs both groups"));
    }
    let mut counts: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for (&a, &g) in assignments.iter().zip(groups) {
        let e = counts.entry(a).or_default();
        match g {
            Group::Minority => e.0 += 1,
            Group::Majority => e.1 += 1,
        }
    }
    Ok(counts
        .values()
        .map(|&(r, b)| {
            if r == 0 || b == 0 {
                0.0
            } else {
                (r as f64 / b as f64).min(b as f64 / r as f64)
            }
        })
        .fold(1.0, f64::min))
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn clustering_cost(
    points: &[&[f64]],
    assignments: &[usize],
    centroids: &[Vec<f64>],
) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(StereoError::structural(
            "points and assignments have different lengths",
        ));
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= centroids.len()) {
        return Err(StereoError::structural(format!(
            "assignment {bad} has no centroid"
        )));
    }
    Ok(crate::models::assignment_cost(
        points,
        assignments,
        centroids,
    ))
}

/// `sum_t p(t|G) ln lambda(t)`. Types with `p(t|G) = 0` contribute 0.
pub fn kl_divergence_groups(dist: &TypeDistribution) -> Result<f64> {
    let lambda = compute_lambda(dist)?;
    Ok(dist
        .p_given_g
        .iter()
        .zip(&lambda)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| p * l.ln())
        .sum())
}

/// `sum_t p ln(p / q)`, computed without forming `lambda`.
pub fn kl_divergence_direct(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(StereoError::structural(
            "distributions have different lengths",
        ));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * pi.ln() - pi * qi.ln();
    }
    Ok(total)
}
