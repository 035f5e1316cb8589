//! The stereotyping mechanisms: exemplar pull, feature-subspace pull and
//! representativeness distortion, plus their common affine form.

mod exemplar;
mod representativeness;
mod unified;

use serde::{Deserialize, Serialize};

pub(crate) use exemplar::relabel;
pub use exemplar::{apply_exemplar, ExemplarPoint, ExemplarSpec, LabelMode, ResolvedExemplar};
pub(crate) use representativeness::saturation_of;
pub use representativeness::{
    apply_representativeness, compute_lambda, distort_distribution, lambda_prime, resample_types,
    RepresentativenessSpec, SaturationState, TypeDistribution, NEAR_SATURATION_MASS,
    PROBABILITY_FLOOR,
};
pub use unified::{
    as_general_transform, exemplar_transform, representativeness_transform, GeneralLinearTransform,
    VKind,
};

use crate::data::DataTable;
use crate::error::Result;
use crate::rng::RandomSeed;

/// Any of the three mechanisms, as read from a JSON config block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum StereotypeSpec {
    Exemplar {
        alpha: f64,
        exemplar: ExemplarPoint,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<usize>>,
    },
    Subspace {
        alpha: f64,
        exemplar: ExemplarPoint,
        mask: Vec<usize>,
    },
    Representativeness(RepresentativenessSpec),
}

impl StereotypeSpec {
    pub fn exemplar_spec(&self) -> Option<ExemplarSpec> {
        match self {
            StereotypeSpec::Exemplar {
                alpha,
                exemplar,
                mask,
            } => Some(ExemplarSpec::new(exemplar.clone(), *alpha, mask.clone())),
            StereotypeSpec::Subspace {
                alpha,
                exemplar,
                mask,
            } => Some(ExemplarSpec::new(
                exemplar.clone(),
                *alpha,
                Some(mask.clone()),
            )),
            StereotypeSpec::Representativeness(_) => None,
        }
    }

    pub fn mechanism(&self) -> &'static str {
        match self {
            StereotypeSpec::Exemplar { .. } => "exemplar",
            StereotypeSpec::Subspace { .. } => "subspace",
            StereotypeSpec::Representativeness(_) => "representativeness",
        }
    }

    /// Apply the mechanism to a table. `seed` drives representativeness
    /// resampling and is ignored by the geometric mechanisms.
    pub fn apply(
        &self,
        table: &DataTable,
        labels: LabelMode,
        seed: RandomSeed,
    ) -> Result<DataTable> {
        match self {
            StereotypeSpec::Representativeness(r) => apply_representativeness(table, r, seed),
            other => apply_exemplar(
                table,
                &other.exemplar_spec().expect("exemplar spec"),
                labels,
            ),
        }
    }
}
