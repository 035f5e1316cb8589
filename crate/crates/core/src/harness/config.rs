//! JSON configuration shared by the CLI commands and experiment runners.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SelectionRule;
use crate::error::{Result, StereoError};
use crate::rng::RandomSeed;
use crate::transforms::StereotypeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Nb,
    Regression,
    Clustering,
    Postprocess,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Nb => "nb",
            ExperimentKind::Regression => "regression",
            ExperimentKind::Clustering => "clustering",
            ExperimentKind::Postprocess => "postprocess",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| StereoError::parameter(format!("unknown experiment '{name}'")))
    }
}

/// Which learner `fit` trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Ols,
    Kmeans,
    Fairlet,
}

/// Label handling for geometric perturbations in the `perturb` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPolicy {
    #[default]
    Fixed,
    /// Recompute the regression target `y = -x3 + 2 x4 + noise`.
    Recomputed,
}

/// Which reconstruction the `mitigate` command runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum MitigationConfig {
    Exemplar {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<usize>>,
    },
    Representativeness {
        type_column: String,
    },
}

/// Every field except `experiment` is optional; unset values take the
/// per-experiment defaults exposed by the accessor methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: RandomSeed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_halfwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_sensitive: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_math_given_majority: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRule>,
    /// CSV to use instead of a generated dataset (single-step commands).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stereotype: Option<StereotypeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationConfig>,
    /// Output directory used when the CLI gets no `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

const DEFAULT_ALPHA_SWEEP: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: RandomSeed::default(),
            sweep: None,
            lambda_targets: None,
            epsilon: None,
            n: None,
            k: None,
            restarts: None,
            noise_halfwidth: None,
            std: None,
            smoothing: None,
            split_ratio: None,
            p_sensitive: None,
            p_math_given_majority: None,
            selection: None,
            input: None,
            stereotype: None,
            labels: None,
            model: None,
            mitigation: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep values: `rho` for `nb`, `alpha` otherwise.
    pub fn sweep(&self) -> Vec<f64> {
        self.sweep.clone().unwrap_or_else(|| match self.experiment {
            ExperimentKind::Nb => (1..=10).map(f64::from).collect(),
            _ => DEFAULT_ALPHA_SWEEP.to_vec(),
        })
    }

    pub fn sweep_name(&self) -> &'static str {
        match self.experiment {
            ExperimentKind::Nb => "rho",
            _ => "alpha",
        }
    }

    pub fn lambda_targets(&self) -> Vec<f64> {
        self.lambda_targets.clone().unwrap_or_else(|| vec![1.5])
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(match self.experiment {
            ExperimentKind::Nb => 0.1,
            ExperimentKind::Regression | ExperimentKind::Postprocess => 0.05,
            ExperimentKind::Clustering => 0.1,
        })
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(match self.experiment {
            ExperimentKind::Clustering => 400,
            _ => 2000,
        })
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(2)
    }

    pub fn restarts(&self) -> usize {
        self.restarts.unwrap_or(crate::models::DEFAULT_RESTARTS)
    }

    pub fn noise_halfwidth(&self) -> f64 {
        self.noise_halfwidth.unwrap_or(0.1)
    }

    pub fn std(&self) -> f64 {
        self.std.unwrap_or(0.3)
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing.unwrap_or(1.0)
    }

    pub fn split_ratio(&self) -> f64 {
        self.split_ratio.unwrap_or(0.5)
    }

    pub fn p_sensitive(&self) -> f64 {
        self.p_sensitive.unwrap_or(0.5)
    }

    pub fn p_math_given_majority(&self) -> f64 {
        self.p_math_given_majority.unwrap_or(0.4)
    }

    pub fn selection(&self) -> SelectionRule {
        self.selection.unwrap_or_default()
    }

    pub fn labels(&self) -> LabelPolicy {
        self.labels.unwrap_or_default()
    }

    /// Range checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let sweep = self.sweep();
        if sweep.is_empty() {
            return Err(StereoError::parameter("sweep must not be empty"));
        }
        for &v in &sweep {
            let ok = match self.experiment {
                ExperimentKind::Nb => v >= 0.0 && v.is_finite(),
                _ => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(StereoError::parameter(format!(
                    "sweep value {v} is invalid for {}",
                    self.sweep_name()
                )));
            }
        }
        let base = self.p_math_given_majority();
        if !(0.0..=1.0).contains(&base) {
            return Err(StereoError::parameter(format!(
                "p_math_given_majority = {base} is not a probability"
            )));
        }
        for &l in &self.lambda_targets() {
            if !(l > 0.0) || l * base > 1.0 {
                return Err(StereoError::parameter(format!(
                    "lambda target {l} gives p(math | minority) = {} outside [0, 1]",
                    l * base
                )));
            }
        }
        let eps = self.epsilon();
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(StereoError::parameter(format!(
                "epsilon = {eps} must be finite and > 0"
            )));
        }
        if self.restarts() == 0 {
            return Err(StereoError::parameter("restarts must be at least 1"));
        }
        if self.k() == 0 {
            return Err(StereoError::parameter("k must be at least 1"));
        }
        let ratio = self.split_ratio();
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(StereoError::parameter(format!(
                "split_ratio {ratio} must lie in (0, 1)"
            )));
        }
        if !(self.smoothing() >= 0.0) {
            return Err(StereoError::parameter("smoothing must be >= 0"));
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"nb"}"#).unwrap();
        assert_eq!(c.sweep(), (1..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(c.lambda_targets(), vec![1.5]);
        assert_eq!(c.seed, RandomSeed(42));
        let r = ExperimentConfig::from_json(r#"{"experiment":"regression","seed":7}"#).unwrap();
        assert_eq!(r.sweep().len(), 10);
        assert_eq!(r.seed, RandomSeed(7));
    }

    #[test]
    fn invalid_configs() {
        assert!(
            ExperimentConfig::from_json(r#"{"experiment":"regression","sweep":[1.5]}"#).is_err()
        );
        assert!(
            ExperimentConfig::from_json(r#"{"experiment":"nb","lambda_targets":[3.0]}"#).is_err()
        );
        assert!(ExperimentConfig::from_json(r#"{"experiment":"nb","bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"other"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"clustering","epsilon":0}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(ExperimentKind::Nb);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = RandomSeed(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn stereotype_block_parses() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment":"regression","stereotype":{"mechanism":"subspace","alpha":0.5,"exemplar":{"row":3},"mask":[1,2,3]},
                "mitigation":{"mechanism":"exemplar","mask":[1,2,3]}}"#,
        )
        .unwrap();
        assert!(matches!(
            c.stereotype,
            Some(StereotypeSpec::Subspace { .. })
        ));
        assert_eq!(
            c.mitigation,
            Some(MitigationConfig::Exemplar {
                mask: Some(vec![1, 2, 3])
            })
        );
    }
}
