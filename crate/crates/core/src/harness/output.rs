//! Long-form result tables with a provenance header.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Stereotyped,
    Mitigated,
    /// Perturbed features with the labels restored to their original values.
    LabelPostprocessed,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Stereotyped => "stereotyped",
            Variant::Mitigated => "mitigated",
            Variant::LabelPostprocessed => "label_postprocessed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub mechanism: String,
    pub sweep_param: String,
    pub value: f64,
    pub variant: Variant,
    pub metric: String,
    pub metric_value: f64,
    pub seed: u64,
}

/// Rows of one experiment run plus header notes and a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: String,
    pub rows: Vec<ResultRow>,
    /// Extra `# key value` header lines.
    pub notes: Vec<(String, String)>,
    pub summary: serde_json::Value,
    /// Sweep cells whose mitigation was refused (saturation, no candidate).
    pub refused_cells: usize,
}

impl ExperimentResult {
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.experiment
                .cmp(&b.experiment)
                .then_with(|| a.mechanism.cmp(&b.mechanism))
                .then_with(|| a.sweep_param.cmp(&b.sweep_param))
                .then_with(|| a.value.total_cmp(&b.value))
                .then_with(|| a.variant.cmp(&b.variant))
                .then_with(|| a.metric.cmp(&b.metric))
                .then_with(|| a.seed.cmp(&b.seed))
        });
    }

    /// Value of one metric, if present.
    pub fn metric(
        &self,
        sweep_param: &str,
        value: f64,
        variant: Variant,
        metric: &str,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.sweep_param == sweep_param
                    && r.value == value
                    && r.variant == variant
                    && r.metric == metric
            })
            .map(|r| r.metric_value)
    }

    /// `(value, metric_value)` pairs of one metric across the sweep, in
    /// ascending sweep order.
    pub fn series(&self, sweep_param: &str, variant: Variant, metric: &str) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.sweep_param == sweep_param && r.variant == variant && r.metric == metric)
            .map(|r| (r.value, r.metric_value))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Header lines, `#`-prefixed.
    pub fn provenance(&self, cfg: &ExperimentConfig) -> Vec<String> {
        let mut lines = vec![
            format!("# stereolab {VERSION}"),
            format!("# config_sha256 {}", cfg.hash()),
            format!("# seed {}", cfg.seed.0),
        ];
        lines.extend(self.notes.iter().map(|(k, v)| format!("# {k} {v}")));
        lines
    }

    pub fn write_csv<W: Write>(&self, cfg: &ExperimentConfig, mut writer: W) -> Result<()> {
        for line in self.provenance(cfg) {
            writeln!(writer, "{line}")?;
        }
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "experiment",
            "mechanism",
            "sweep_param",
            "value",
            "variant",
            "metric",
            "metric_value",
            "seed",
        ])?;
        for r in &self.rows {
            csv.write_record([
                r.experiment.clone(),
                r.mechanism.clone(),
                r.sweep_param.clone(),
                r.value.to_string(),
                r.variant.as_str().to_string(),
                r.metric.clone(),
                r.metric_value.to_string(),
                r.seed.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, cfg: &ExperimentConfig) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(cfg, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Summary JSON with the provenance fields added.
    pub fn summary_json(&self, cfg: &ExperimentConfig) -> serde_json::Value {
        let mut s = self.summary.clone();
        if let serde_json::Value::Object(map) = &mut s {
            map.insert("version".into(), VERSION.into());
            map.insert("config_sha256".into(), cfg.hash().into());
            map.insert("seed".into(), cfg.seed.0.into());
            map.insert(
                "config".into(),
                serde_json::to_value(cfg).expect("config serializes"),
            );
            map.insert("refused_cells".into(), self.refused_cells.into());
        }
        s
    }
}

/// Collects rows for one experiment with fixed experiment/seed columns.
pub(crate) struct RowSink {
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

impl RowSink {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            rows: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        mechanism: &str,
        sweep_param: &str,
        value: f64,
        variant: Variant,
        metric: &str,
        v: f64,
    ) {
        self.rows.push(ResultRow {
            experiment: self.experiment.clone(),
            mechanism: mechanism.into(),
            sweep_param: sweep_param.into(),
            value,
            variant,
            metric: metric.into(),
            metric_value: v,
            seed: self.seed,
        });
    }
}
