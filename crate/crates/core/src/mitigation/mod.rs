//! Reconstruction of pre-stereotype data under the assumption that all
//! groups share one underlying distribution, up to a tolerance `epsilon`.

mod exemplar;
mod representativeness;

use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Result, StereoError};

pub use exemplar::{
    alpha_for_candidate, feasible_exemplars, mitigate_exemplar, mitigate_exemplar_with_labels,
    Candidate, ExemplarEstimate, FeasibleExemplar, COLLAPSE_MARGIN,
};
pub use representativeness::{
    mitigate_representativeness, mitigate_representativeness_table, reconstruct_with_rho,
    RhoEstimate,
};

/// Tolerance of the equality assumption: a radius around the majority mean
/// for exemplar mitigation, a bound on `|ln lambda(t)|` for
/// representativeness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaeParams {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationStatus {
    Ok,
    NoStereotype,
    Saturated,
    NoCandidate,
}

/// Flat JSON summary of a mitigation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub mechanism: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplar_row: Option<usize>,
    pub epsilon: f64,
    pub num_candidates: usize,
    pub status: MitigationStatus,
}

impl MitigationReport {
    pub fn from_exemplar(mechanism: &str, est: &ExemplarEstimate) -> Self {
        Self {
            mechanism: mechanism.into(),
            alpha_hat: Some(est.alpha_hat),
            rho_hat: None,
            exemplar_row: Some(est.exemplar_row),
            epsilon: est.epsilon,
            num_candidates: est.candidates.len(),
            status: if est.alpha_hat == 0.0 {
                MitigationStatus::NoStereotype
            } else {
                MitigationStatus::Ok
            },
        }
    }

    pub fn from_rho(est: &RhoEstimate) -> Self {
        Self {
            mechanism: "representativeness".into(),
            alpha_hat: None,
            rho_hat: Some(est.rho_hat),
            exemplar_row: None,
            epsilon: est.epsilon,
            num_candidates: 0,
            status: est.status,
        }
    }

    /// Report for a run that ended in a saturation or no-candidate error.
    /// Other errors give `None`.
    pub fn from_error(mechanism: &str, epsilon: f64, err: &StereoError) -> Option<Self> {
        let status = match err {
            StereoError::Saturation { .. } => MitigationStatus::Saturated,
            StereoError::NoCandidate { .. } | StereoError::Collapse { .. } => {
                MitigationStatus::NoCandidate
            }
            _ => return None,
        };
        Some(Self {
            mechanism: mechanism.into(),
            alpha_hat: None,
            rho_hat: None,
            exemplar_row: None,
            epsilon,
            num_candidates: 0,
            status,
        })
    }
}

/// `kappa * |mu_minority - mu_majority|` on the given features (all if
/// `mask` is `None`).
pub fn suggest_epsilon(table: &DataTable, kappa: f64, mask: Option<&[usize]>) -> Result<f64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(StereoError::parameter(format!(
            "kappa = {kappa} must be finite and >= 0"
        )));
    }
    let s = crate::data::group_stats(table)?;
    let all: Vec<usize> = (0..table.n_cols()).collect();
    let cols = mask.unwrap_or(&all);
    let d2: f64 = cols
        .iter()
        .map(|&j| (s.mu_minority[j] - s.mu_majority[j]).powi(2))
        .sum();
    Ok(kappa * d2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_layout() {
        let r = MitigationReport {
            mechanism: "representativeness".into(),
            alpha_hat: None,
            rho_hat: Some(1.5),
            exemplar_row: None,
            epsilon: 0.1,
            num_candidates: 0,
            status: MitigationStatus::NoStereotype,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "no_stereotype");
        assert_eq!(v["rho_hat"], 1.5);
        assert!(v.get("alpha_hat").is_none());
    }
}
