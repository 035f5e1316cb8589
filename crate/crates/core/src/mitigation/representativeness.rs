//! Reconstruction of representativeness-distorted type probabilities.
//!
//! If each true log-ratio `ln lambda(t)` lies in `[-epsilon, epsilon]`, the
//! observed `lambda'(t)` constrain the stereotyping strength from below by
//! `rho_hat = (ln max lambda' - epsilon) / (2 epsilon)`. Taking the smallest
//! admissible strength is the conservative choice. Representativeness is then
//! recovered as `lambda(t) ~ lambda'(t)^(1 / rho_hat)` and turned back into
//! target-group probabilities with the unchanged `p(t | not G)`.

use super::{MitigationStatus, WaeParams};
use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::rng::RandomSeed;
use crate::transforms::{
    compute_lambda, resample_types, saturation_of, SaturationState, TypeDistribution,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RhoEstimate {
    pub rho_hat: f64,
    pub reconstructed: TypeDistribution,
    pub lambda_prime_observed: Vec<f64>,
    pub epsilon: f64,
    pub status: MitigationStatus,
}

/// `p(t|G) ~ lambda'(t)^(1 / rho) p(t | not G)`, normalized.
pub fn reconstruct_with_rho(observed: &TypeDistribution, rho: f64) -> Result<TypeDistribution> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(StereoError::parameter(format!(
            "reconstruction exponent needs rho > 0, got {rho}"
        )));
    }
    let lambda_prime = compute_lambda(observed)?;
    let weights: Vec<f64> = lambda_prime
        .iter()
        .zip(&observed.p_given_not_g)
        .map(|(l, q)| l.powf(1.0 / rho) * q)
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(TypeDistribution {
        types: observed.types.clone(),
        p_given_g: weights.into_iter().map(|w| w / z).collect(),
        p_given_not_g: observed.p_given_not_g.clone(),
    })
}

pub fn mitigate_representativeness(
    observed: &TypeDistribution,
    wae: &WaeParams,
) -> Result<RhoEstimate> {
    let eps = wae.epsilon;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(StereoError::parameter(format!(
            "epsilon = {eps} must be finite and > 0"
        )));
    }
    match saturation_of(&observed.types, &observed.p_given_g) {
        SaturationState::Clear => {}
        SaturationState::Saturated { type_value } => {
            return Err(StereoError::Saturation {
                type_value,
                reason: "observed target-group probability is at the floor; the original cannot be recovered".into(),
            })
        }
        SaturationState::NearSaturated { type_value, mass } => {
            return Err(StereoError::Saturation {
                type_value,
                reason: format!("type holds {mass:.6} of the target-group mass; the original cannot be recovered"),
            })
        }
    }
    let lambda_prime = compute_lambda(observed)?;
    let max = lambda_prime
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max.ln() <= eps {
        return Ok(RhoEstimate {
            rho_hat: 0.0,
            reconstructed: observed.clone(),
            lambda_prime_observed: lambda_prime,
            epsilon: eps,
            status: MitigationStatus::NoStereotype,
        });
    }
    let rho_hat = (max.ln() - eps) / (2.0 * eps);
    Ok(RhoEstimate {
        rho_hat,
        reconstructed: reconstruct_with_rho(observed, rho_hat)?,
        lambda_prime_observed: lambda_prime,
        epsilon: eps,
        status: MitigationStatus::Ok,
    })
}

/// Estimate of the distribution of column `col` plus a table whose target
/// rows have been moved onto the reconstructed probabilities.
pub fn mitigate_representativeness_table(
    table: &DataTable,
    col: usize,
    target: Group,
    wae: &WaeParams,
    seed: RandomSeed,
) -> Result<(RhoEstimate, DataTable)> {
    let observed = TypeDistribution::from_table(table, col, target)?;
    let est = mitigate_representativeness(&observed, wae)?;
    let out = if est.status == MitigationStatus::NoStereotype {
        table.clone()
    } else {
        resample_types(
            table,
            col,
            target,
            &observed.types,
            &observed.p_given_g,
            &est.reconstructed.p_given_g,
            seed,
        )?
    };
    Ok((est, out))
}
