//! Exemplar reconstruction.
//!
//! Observed minority mean `mu_a` relates to the unknown true mean `mu_m` by
//! `mu_a = (1 - alpha) mu_m + alpha c`. Under the equality assumption
//! `mu_m` lies in the ball of radius `epsilon` around the majority mean
//! `mu_M`, so for a candidate exemplar `c` the true mean sits on the ray
//! from `mu_a` pointing away from `c`. The candidate is feasible when that
//! ray meets the ball, i.e. when the angle `theta` between `c - mu_a` and
//! `mu_a - mu_M` has `cos theta > 0` and `sin theta <= epsilon / d` with
//! `d = |mu_a - mu_M|`. The entry point of the ray into the ball is the
//! reconstruction closest to `mu_a` and gives the smallest `alpha`.

use serde::{Deserialize, Serialize};

use super::WaeParams;
use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::transforms::LabelMode;

/// `alpha_hat` at or above `1 - COLLAPSE_MARGIN` cannot be inverted.
pub const COLLAPSE_MARGIN: f64 = 1e-9;

/// A minority row that passed the angle test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleExemplar {
    pub row: usize,
    /// Angle between `c - mu_a` and the axis `mu_a - mu_M`, in radians.
    /// Zero when the axis or the direction is degenerate.
    pub angle: f64,
}

/// A feasible candidate with its smallest consistent pull strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub row: usize,
    pub angle: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarEstimate {
    pub exemplar_row: usize,
    /// The chosen exemplar, all features.
    pub exemplar_hat: Vec<f64>,
    pub alpha_hat: f64,
    /// Estimated true minority mean, all features (unmasked ones are the
    /// observed mean).
    pub mu_m_hat: Vec<f64>,
    pub epsilon: f64,
    pub mask: Vec<usize>,
    pub candidates: Vec<Candidate>,
    pub reconstructed: DataTable,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_epsilon(wae: &WaeParams) -> Result<()> {
    if !(wae.epsilon >= 0.0) || !wae.epsilon.is_finite() {
        return Err(StereoError::parameter(format!(
            "epsilon = {} must be finite and >= 0",
            wae.epsilon
        )));
    }
    Ok(())
}

/// Angle test for one candidate; `None` if infeasible.
fn angle_test(mu_alpha: &[f64], mu_majority: &[f64], c: &[f64], epsilon: f64) -> Option<f64> {
    let axis = sub(mu_alpha, mu_majority);
    let dir = sub(c, mu_alpha);
    let d = norm(&axis);
    let len = norm(&dir);
    let angle = if d > 0.0 && len > 0.0 {
        (dot(&dir, &axis) / (d * len)).clamp(-1.0, 1.0).acos()
    } else {
        0.0
    };
    if d <= epsilon {
        return Some(angle);
    }
    if len == 0.0 {
        return None;
    }
    let cos = angle.cos();
    let sin = angle.sin();
    (cos > 0.0 && sin <= epsilon / d).then_some(angle)
}

struct Projected {
    minority: Vec<usize>,
    points: Vec<Vec<f64>>,
    mu_alpha: Vec<f64>,
    mu_majority: Vec<f64>,
}

fn project(table: &DataTable, mask: &[usize]) -> Result<Projected> {
    table.require_both_groups()?;
    let mean_of = |g: Group| -> Vec<f64> {
        let idx = table.indices_of(g);
        let mut m = vec![0.0; mask.len()];
        for &i in &idx {
            for (k, &j) in mask.iter().enumerate() {
                m[k] += table.value(i, j);
            }
        }
        m.iter().map(|v| v / idx.len() as f64).collect()
    };
    let minority = table.indices_of(Group::Minority);
    let points = minority
        .iter()
        .map(|&i| mask.iter().map(|&j| table.value(i, j)).collect())
        .collect();
    Ok(Projected {
        minority,
        points,
        mu_alpha: mean_of(Group::Minority),
        mu_majority: mean_of(Group::Majority),
    })
}

fn resolve_mask(table: &DataTable, mask: Option<&[usize]>) -> Result<Vec<usize>> {
    let d = table.n_cols();
    match mask {
        None => Ok((0..d).collect()),
        Some([]) => Err(StereoError::parameter("feature mask must not be empty")),
        Some(m) => {
            if let Some(&bad) = m.iter().find(|&&j| j >= d) {
                return Err(StereoError::structural(format!(
                    "mask index {bad} out of range for {d} features"
                )));
            }
            let mut sorted = m.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != m.len() {
                return Err(StereoError::parameter("feature mask contains duplicates"));
            }
            Ok(m.to_vec())
        }
    }
}

/// Observed minority rows that pass the angle test on all features.
pub fn feasible_exemplars(table: &DataTable, wae: &WaeParams) -> Result<Vec<FeasibleExemplar>> {
    check_epsilon(wae)?;
    let mask: Vec<usize> = (0..table.n_cols()).collect();
    let p = project(table, &mask)?;
    Ok(feasible_in(&p, wae.epsilon))
}

fn feasible_in(p: &Projected, epsilon: f64) -> Vec<FeasibleExemplar> {
    p.minority
        .iter()
        .zip(&p.points)
        .filter_map(|(&row, c)| {
            angle_test(&p.mu_alpha, &p.mu_majority, c, epsilon)
                .map(|angle| FeasibleExemplar { row, angle })
        })
        .collect()
}

/// Smallest `alpha` consistent with exemplar `c`, and the matching estimate
/// of the true minority mean (the point where the ray from `mu_alpha` away
/// from `c` enters the ball around `mu_majority`).
pub fn alpha_for_candidate(
    mu_alpha: &[f64],
    mu_majority: &[f64],
    c: &[f64],
    wae: &WaeParams,
) -> Result<(f64, Vec<f64>)> {
    check_epsilon(wae)?;
    if mu_alpha.len() != mu_majority.len() || c.len() != mu_alpha.len() {
        return Err(StereoError::structural(
            "candidate and means differ in dimension",
        ));
    }
    let axis = sub(mu_alpha, mu_majority);
    let d2 = dot(&axis, &axis);
    let eps2 = wae.epsilon * wae.epsilon;
    if d2 <= eps2 {
        return Ok((0.0, mu_alpha.to_vec()));
    }
    let ray = sub(mu_alpha, c);
    let len = norm(&ray);
    if len == 0.0 {
        return Err(StereoError::parameter(
            "candidate coincides with the observed minority mean",
        ));
    }
    let unit: Vec<f64> = ray.iter().map(|v| v / len).collect();
    // |axis + t unit|^2 = eps^2
    let b = dot(&unit, &axis);
    let disc = b * b - d2 + eps2;
    if b >= 0.0 || disc < -1e-12 * d2 {
        return Err(StereoError::NoCandidate {
            epsilon: wae.epsilon,
        });
    }
    let t = -b - disc.max(0.0).sqrt();
    let mu_m_hat = mu_alpha.iter().zip(&unit).map(|(m, u)| m + t * u).collect();
    Ok((t / (t + len), mu_m_hat))
}

/// Reconstruct the pre-stereotype table by inverting the pull with the
/// minimal-alpha feasible exemplar. With a mask only those features enter
/// the geometry and get reconstructed. Labels are left as they are.
pub fn mitigate_exemplar(
    table: &DataTable,
    wae: &WaeParams,
    mask: Option<&[usize]>,
) -> Result<ExemplarEstimate> {
    mitigate_exemplar_with_labels(table, wae, mask, LabelMode::Fixed)
}

pub fn mitigate_exemplar_with_labels(
    table: &DataTable,
    wae: &WaeParams,
    mask: Option<&[usize]>,
    labels: LabelMode,
) -> Result<ExemplarEstimate> {
    check_epsilon(wae)?;
    let mask = resolve_mask(table, mask)?;
    let p = project(table, &mask)?;
    let mut candidates = Vec::new();
    for f in feasible_in(&p, wae.epsilon) {
        let k = p
            .minority
            .iter()
            .position(|&r| r == f.row)
            .expect("feasible row is a minority row");
        match alpha_for_candidate(&p.mu_alpha, &p.mu_majority, &p.points[k], wae) {
            Ok((alpha, _)) => candidates.push(Candidate {
                row: f.row,
                angle: f.angle,
                alpha,
            }),
            Err(StereoError::NoCandidate { .. }) | Err(StereoError::Parameter(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.alpha
                .total_cmp(&b.alpha)
                .then(a.angle.total_cmp(&b.angle))
                .then(a.row.cmp(&b.row))
        })
        .copied()
        .ok_or(StereoError::NoCandidate {
            epsilon: wae.epsilon,
        })?;
    if best.alpha >= 1.0 - COLLAPSE_MARGIN {
        return Err(StereoError::Collapse {
            alpha_hat: best.alpha,
        });
    }
    let c_full = table.row(best.row).to_vec();
    let c_masked: Vec<f64> = mask.iter().map(|&j| c_full[j]).collect();
    let (_, mu_hat_masked) = alpha_for_candidate(&p.mu_alpha, &p.mu_majority, &c_masked, wae)?;

    let alpha = best.alpha;
    let mut reconstructed = table.clone();
    if alpha > 0.0 {
        // (p - alpha c) / (1 - alpha), written so that p = c maps to c exactly
        let gain = alpha / (1.0 - alpha);
        for &i in &p.minority {
            let row = reconstructed.row_mut(i);
            for &j in &mask {
                row[j] += gain * (row[j] - c_full[j]);
            }
        }
        crate::transforms::relabel(table, &mut reconstructed, labels);
    }

    let mut mu_m_hat: Vec<f64> = (0..table.n_cols())
        .map(|j| {
            p.minority.iter().map(|&i| table.value(i, j)).sum::<f64>() / p.minority.len() as f64
        })
        .collect();
    for (&j, v) in mask.iter().zip(mu_hat_masked) {
        mu_m_hat[j] = v;
    }
    Ok(ExemplarEstimate {
        exemplar_row: best.row,
        exemplar_hat: c_full,
        alpha_hat: alpha,
        mu_m_hat,
        epsilon: wae.epsilon,
        mask,
        candidates,
        reconstructed,
    })
}
