//! Probabilistic stereotyping by representativeness.
//!
//! For a discrete feature with types `t`, the representativeness of `t` for
//! the target group `G` is `lambda(t) = Pr[t|G] / Pr[t|not G]`. Stereotyping
//! reweights the target group's perceived probabilities by `lambda(t)^rho`
//! and renormalizes; the other group is left alone.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::rng::{RandomSeed, Stream};

/// Probabilities at or below this are treated as saturated.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// A distribution whose dominant type carries more than this mass is
/// considered saturated for reconstruction purposes.
pub const NEAR_SATURATION_MASS: f64 = 0.99;

const SUM_TOLERANCE: f64 = 1e-12;

/// Group-conditional distributions of one discrete feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    pub types: Vec<f64>,
    pub p_given_g: Vec<f64>,
    pub p_given_not_g: Vec<f64>,
}

/// How close a distribution is to losing types entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaturationState {
    Clear,
    /// One type holds more than [`NEAR_SATURATION_MASS`] of the mass.
    NearSaturated {
        type_value: f64,
        mass: f64,
    },
    /// Some type's probability is at or below [`PROBABILITY_FLOOR`].
    Saturated {
        type_value: f64,
    },
}

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(StereoError::parameter(format!(
            "{name} has invalid entry {x}"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOLERANCE {
        return Err(StereoError::parameter(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

impl TypeDistribution {
    pub fn new(types: Vec<f64>, p_given_g: Vec<f64>, p_given_not_g: Vec<f64>) -> Result<Self> {
        if types.is_empty() || types.len() != p_given_g.len() || types.len() != p_given_not_g.len()
        {
            return Err(StereoError::structural(
                "type distribution vectors must be non-empty and of equal length",
            ));
        }
        check_simplex("p(t|G)", &p_given_g)?;
        check_simplex("p(t|not G)", &p_given_not_g)?;
        Ok(Self {
            types,
            p_given_g,
            p_given_not_g,
        })
    }

    /// Empirical distribution of column `col`, with `target` playing the role
    /// of `G`. Types are the distinct column values in ascending order.
    pub fn from_table(table: &DataTable, col: usize, target: Group) -> Result<Self> {
        if col >= table.n_cols() {
            return Err(StereoError::structural(format!(
                "type column {col} out of range"
            )));
        }
        table.require_both_groups()?;
        let mut counts: BTreeMap<u64, [usize; 2]> = BTreeMap::new();
        for (row, g) in table.rows().zip(table.groups()) {
            let v = row[col];
            if !v.is_finite() {
                return Err(StereoError::structural(format!(
                    "type column holds non-finite value {v}"
                )));
            }
            let slot = counts.entry(ordered_key(v)).or_default();
            slot[(*g == target) as usize] += 1;
        }
        let n_g = table.count_of(target) as f64;
        let n_other = table.count_of(target.other()) as f64;
        let types = counts.keys().map(|&k| from_ordered_key(k)).collect();
        let p_given_g = counts.values().map(|c| c[1] as f64 / n_g).collect();
        let p_given_not_g = counts.values().map(|c| c[0] as f64 / n_other).collect();
        Ok(Self {
            types,
            p_given_g,
            p_given_not_g,
        })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn type_index(&self, value: f64) -> Option<usize> {
        self.types.iter().position(|&t| t == value)
    }

    /// Saturation state of the target group's probabilities.
    pub fn saturation(&self) -> SaturationState {
        saturation_of(&self.types, &self.p_given_g)
    }
}

pub(crate) fn saturation_of(types: &[f64], p: &[f64]) -> SaturationState {
    if let Some(t) = p.iter().position(|&x| x <= PROBABILITY_FLOOR) {
        return SaturationState::Saturated {
            type_value: types[t],
        };
    }
    if p.len() > 1 {
        let (t, &mass) = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty distribution");
        if mass > NEAR_SATURATION_MASS {
            return SaturationState::NearSaturated {
                type_value: types[t],
                mass,
            };
        }
    }
    SaturationState::Clear
}

// Order-preserving map from finite f64 to u64 so floats can key a BTreeMap.
fn ordered_key(v: f64) -> u64 {
    let v = if v == 0.0 { 0.0 } else { v };
    let bits = v.to_bits();
    if bits >> 63 == 0 {
        bits | (1 << 63)
    } else {
        !bits
    }
}

fn from_ordered_key(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

/// `lambda(t) = p(t|G) / p(t|not G)`.
pub fn compute_lambda(dist: &TypeDistribution) -> Result<Vec<f64>> {
    dist.p_given_g
        .iter()
        .zip(&dist.p_given_not_g)
        .zip(&dist.types)
        .map(|((&pg, &pn), &t)| {
            if pn <= PROBABILITY_FLOOR {
                Err(StereoError::Saturation {
                    type_value: t,
                    reason: format!("p(t|not G) = {pn} leaves lambda undefined"),
                })
            } else {
                Ok(pg / pn)
            }
        })
        .collect()
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(StereoError::parameter(format!(
            "rho = {rho} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Normalizer `sum_s p(s|G) lambda(s)^rho`.
pub(crate) fn normalizer(p_given_g: &[f64], lambda: &[f64], rho: f64) -> f64 {
    p_given_g
        .iter()
        .zip(lambda)
        .map(|(p, l)| p * l.powf(rho))
        .sum()
}

/// Perceived target-group probabilities after amplification by
/// `lambda^rho`. The non-target distribution is returned unchanged.
pub fn distort_distribution(dist: &TypeDistribution, rho: f64) -> Result<TypeDistribution> {
    check_rho(rho)?;
    let lambda = compute_lambda(dist)?;
    if rho == 0.0 {
        return Ok(dist.clone());
    }
    let weights: Vec<f64> = dist
        .p_given_g
        .iter()
        .zip(&lambda)
        .map(|(p, l)| p * l.powf(rho))
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(TypeDistribution {
        types: dist.types.clone(),
        p_given_g: weights.into_iter().map(|w| w / z).collect(),
        p_given_not_g: dist.p_given_not_g.clone(),
    })
}

/// Representativeness after distortion, computed directly from the
/// undistorted distribution: `lambda(t)^(1+rho) / sum_s p(s|G) lambda(s)^rho`.
pub fn lambda_prime(dist: &TypeDistribution, rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let lambda = compute_lambda(dist)?;
    let z = normalizer(&dist.p_given_g, &lambda, rho);
    Ok(lambda.iter().map(|l| l.powf(1.0 + rho) / z).collect())
}

/// Parameters of representativeness stereotyping applied to a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativenessSpec {
    pub rho: f64,
    /// Name of the discrete feature whose values are the types.
    pub type_column: String,
    #[serde(default = "default_target")]
    pub target_group: Group,
}

fn default_target() -> Group {
    Group::Minority
}

impl RepresentativenessSpec {
    pub fn new(rho: f64, type_column: impl Into<String>) -> Self {
        Self {
            rho,
            type_column: type_column.into(),
            target_group: Group::Minority,
        }
    }

    pub fn column(&self, table: &DataTable) -> Result<usize> {
        table.column_index(&self.type_column).ok_or_else(|| {
            StereoError::structural(format!("no column named '{}'", self.type_column))
        })
    }
}

/// Distort the empirical type distribution of the target group and move the
/// table's target rows onto the distorted distribution.
pub fn apply_representativeness(
    table: &DataTable,
    spec: &RepresentativenessSpec,
    seed: RandomSeed,
) -> Result<DataTable> {
    check_rho(spec.rho)?;
    let col = spec.column(table)?;
    let observed = TypeDistribution::from_table(table, col, spec.target_group)?;
    let distorted = distort_distribution(&observed, spec.rho)?;
    resample_types(
        table,
        col,
        spec.target_group,
        &observed.types,
        &observed.p_given_g,
        &distorted.p_given_g,
        seed,
    )
}

/// Move the target group's values in column `col` from empirical
/// distribution `from` to `to` with a maximal coupling: a row of type `t`
/// keeps its value with probability `min(1, to[t] / from[t])`, otherwise it
/// is redrawn from the excess mass `max(0, to - from)`. The resulting
/// frequencies match `to` in expectation while as few rows as possible
/// change, so `from == to` leaves the table untouched. Every target row
/// consumes exactly two uniforms, in ascending row order.
pub fn resample_types(
    table: &DataTable,
    col: usize,
    target: Group,
    types: &[f64],
    from: &[f64],
    to: &[f64],
    seed: RandomSeed,
) -> Result<DataTable> {
    if types.len() != from.len() || types.len() != to.len() {
        return Err(StereoError::structural("type vectors differ in length"));
    }
    let excess: Vec<f64> = to.iter().zip(from).map(|(t, f)| (t - f).max(0.0)).collect();
    let excess_total: f64 = excess.iter().sum();
    let mut rng = seed.rng(Stream::Resample);
    let mut out = table.clone();
    for i in table.indices_of(target) {
        let [u_keep, u_pick]: [f64; 2] = rng.random();
        let v = table.value(i, col);
        let t = types
            .iter()
            .position(|&x| x == v)
            .ok_or_else(|| StereoError::structural(format!("value {v} is not a known type")))?;
        let keep = if to[t] >= from[t] {
            1.0
        } else {
            to[t] / from[t]
        };
        if u_keep < keep || excess_total <= 0.0 {
            continue;
        }
        let r = u_pick * excess_total;
        let mut acc = 0.0;
        let pick = excess
            .iter()
            .position(|&e| {
                acc += e;
                e > 0.0 && r < acc
            })
            .or_else(|| excess.iter().rposition(|&e| e > 0.0))
            .unwrap_or(t);
        out.set_value(i, col, types[pick]);
    }
    Ok(out)
}
