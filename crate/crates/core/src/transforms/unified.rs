//! Both mechanisms written as one affine map in a transformed coordinate
//! system: `v(p') = A v(p) + B`.
//!
//! With `v` the identity this is the exemplar pull (`A = (1 - alpha) I`,
//! `B = alpha c`, block-diagonal when a feature mask is used). With `v = ln`
//! applied to representativeness values it is the representativeness
//! distortion: `ln lambda' = (1 + rho) ln lambda - ln sum_s p(s|G) lambda(s)^rho`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::exemplar::ResolvedExemplar;
use super::representativeness::{compute_lambda, normalizer, TypeDistribution, PROBABILITY_FLOOR};
use super::StereotypeSpec;
use crate::data::DataTable;
use crate::error::{Result, StereoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VKind {
    Identity,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralLinearTransform {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v_kind: VKind,
}

impl GeneralLinearTransform {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `v^-1(A v(x) + B)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(StereoError::structural(format!(
                "transform has dimension {}, input has {}",
                self.dim(),
                x.len()
            )));
        }
        let v = match self.v_kind {
            VKind::Identity => DVector::from_column_slice(x),
            VKind::Log => {
                if let Some(bad) = x.iter().find(|&&v| !(v > 0.0)) {
                    return Err(StereoError::Saturation {
                        type_value: *bad,
                        reason: "log coordinates need strictly positive inputs".into(),
                    });
                }
                DVector::from_iterator(x.len(), x.iter().map(|v| v.ln()))
            }
        };
        let out = &self.a * v + &self.b;
        Ok(match self.v_kind {
            VKind::Identity => out.iter().copied().collect(),
            VKind::Log => out.iter().map(|v| v.exp()).collect(),
        })
    }

    /// Apply a log-kind transform to the representativeness values of `dist`
    /// and convert back to target-group probabilities.
    pub fn apply_to_distribution(&self, dist: &TypeDistribution) -> Result<TypeDistribution> {
        if self.v_kind != VKind::Log {
            return Err(StereoError::parameter(
                "only log transforms act on type distributions",
            ));
        }
        let lambda = compute_lambda(dist)?;
        let lambda_prime = self.apply(&lambda)?;
        let p_given_g = lambda_prime
            .iter()
            .zip(&dist.p_given_not_g)
            .map(|(l, q)| l * q)
            .collect();
        Ok(TypeDistribution {
            types: dist.types.clone(),
            p_given_g,
            p_given_not_g: dist.p_given_not_g.clone(),
        })
    }
}

/// Exemplar pull as a `d x d` identity-kind transform.
pub fn exemplar_transform(ex: &ResolvedExemplar, d: usize) -> GeneralLinearTransform {
    let mut a = DMatrix::identity(d, d);
    let mut b = DVector::zeros(d);
    for &j in &ex.mask {
        a[(j, j)] = 1.0 - ex.alpha;
        b[j] = ex.alpha * ex.c[j];
    }
    GeneralLinearTransform {
        a,
        b,
        v_kind: VKind::Identity,
    }
}

/// Representativeness distortion as a log-kind transform on `lambda`.
pub fn representativeness_transform(
    dist: &TypeDistribution,
    rho: f64,
) -> Result<GeneralLinearTransform> {
    if !(rho >= 0.0) {
        return Err(StereoError::parameter(format!("rho = {rho} must be >= 0")));
    }
    let lambda = compute_lambda(dist)?;
    if let Some(t) = dist.p_given_g.iter().position(|&p| p <= PROBABILITY_FLOOR) {
        return Err(StereoError::Saturation {
            type_value: dist.types[t],
            reason: "log transform of a zero probability".into(),
        });
    }
    let k = dist.len();
    let shift = -normalizer(&dist.p_given_g, &lambda, rho).ln();
    Ok(GeneralLinearTransform {
        a: DMatrix::identity(k, k) * (1.0 + rho),
        b: DVector::from_element(k, shift),
        v_kind: VKind::Log,
    })
}

/// Unified form of any stereotype spec. Exemplar specs need the table to
/// resolve the exemplar; representativeness needs the undistorted type
/// distribution because `B` depends on its normalizer.
pub fn as_general_transform(
    spec: &StereotypeSpec,
    table: Option<&DataTable>,
    context: Option<&TypeDistribution>,
) -> Result<GeneralLinearTransform> {
    match spec {
        StereotypeSpec::Representativeness(r) => {
            let dist = context.ok_or_else(|| {
                StereoError::parameter("representativeness transform needs a type distribution")
            })?;
            representativeness_transform(dist, r.rho)
        }
        other => {
            let ex = other
                .exemplar_spec()
                .expect("non-representativeness specs are exemplar specs");
            let table = table
                .ok_or_else(|| StereoError::parameter("exemplar transform needs the table"))?;
            Ok(exemplar_transform(&ex.resolve(table)?, table.n_cols()))
        }
    }
}
