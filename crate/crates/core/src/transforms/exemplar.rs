//! Geometric stereotyping: minority points are pulled toward one exemplar,
//! either in every feature or only in a subset of features.

use serde::{Deserialize, Serialize};

use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};

/// Where the exemplar comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExemplarPoint {
    /// Index of a minority row of the table being transformed.
    Row { row: usize },
    /// Explicit coordinates, either for all `d` features or only for the
    /// masked ones (in mask order).
    Point(Vec<f64>),
}

/// Parameters of the exemplar pull `p -> (1 - alpha) p + alpha c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSpec {
    pub exemplar: ExemplarPoint,
    pub alpha: f64,
    /// Stereotyped feature indices; `None` means every feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<usize>>,
}

/// What happens to the label column when features move.
#[derive(Debug, Clone, Copy)]
pub enum LabelMode {
    /// Labels stay as they are.
    Fixed,
    /// Labels follow the features: `y <- y + f(new_row) - f(old_row)`, so a
    /// row's residual around `f` is preserved.
    Recompute(fn(&[f64]) -> f64),
}

/// Exemplar spec resolved against a concrete table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExemplar {
    /// Exemplar coordinates in full feature space (entries outside the mask
    /// are unused and set to zero for explicit masked points).
    pub c: Vec<f64>,
    pub alpha: f64,
    pub mask: Vec<usize>,
}

impl ExemplarSpec {
    pub fn new(exemplar: ExemplarPoint, alpha: f64, mask: Option<Vec<usize>>) -> Self {
        Self {
            exemplar,
            alpha,
            mask,
        }
    }

    pub fn resolve(&self, table: &DataTable) -> Result<ResolvedExemplar> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(StereoError::parameter(format!(
                "alpha = {} must lie in [0, 1]",
                self.alpha
            )));
        }
        let d = table.n_cols();
        let mask = match &self.mask {
            None => (0..d).collect::<Vec<_>>(),
            Some(m) => {
                if m.is_empty() {
                    return Err(StereoError::parameter("feature mask must not be empty"));
                }
                if let Some(&bad) = m.iter().find(|&&j| j >= d) {
                    return Err(StereoError::structural(format!(
                        "mask index {bad} out of range for {d} features"
                    )));
                }
                let mut sorted = m.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != m.len() {
                    return Err(StereoError::parameter("feature mask contains duplicates"));
                }
                m.clone()
            }
        };
        let c = match &self.exemplar {
            ExemplarPoint::Row { row } => {
                if *row >= table.n_rows() {
                    return Err(StereoError::structural(format!(
                        "exemplar row {row} out of range"
                    )));
                }
                if table.group(*row) != Group::Minority {
                    return Err(StereoError::parameter(format!(
                        "exemplar row {row} is not a minority row"
                    )));
                }
                table.row(*row).to_vec()
            }
            ExemplarPoint::Point(v) if v.len() == d => v.clone(),
            ExemplarPoint::Point(v) if v.len() == mask.len() => {
                let mut c = vec![0.0; d];
                for (&j, &x) in mask.iter().zip(v) {
                    c[j] = x;
                }
                c
            }
            ExemplarPoint::Point(v) => {
                return Err(StereoError::structural(format!(
                    "exemplar has {} coordinates, expected {d} or {}",
                    v.len(),
                    mask.len()
                )))
            }
        };
        Ok(ResolvedExemplar {
            c,
            alpha: self.alpha,
            mask,
        })
    }
}

/// One coordinate pulled toward the exemplar. Written as `x + alpha (c - x)`
/// so the exemplar itself is a fixed point; `alpha = 1` lands exactly on `c`.
#[inline]
pub(crate) fn pull(x: f64, c: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        c
    } else {
        x + alpha * (c - x)
    }
}

/// Pull every minority row toward the exemplar on the masked features.
/// Majority rows and the group column are never touched.
pub fn apply_exemplar(
    table: &DataTable,
    spec: &ExemplarSpec,
    labels: LabelMode,
) -> Result<DataTable> {
    let resolved = spec.resolve(table)?;
    Ok(apply_resolved(table, &resolved, labels))
}

pub(crate) fn apply_resolved(
    table: &DataTable,
    ex: &ResolvedExemplar,
    labels: LabelMode,
) -> DataTable {
    let mut out = table.clone();
    if ex.alpha == 0.0 {
        return out;
    }
    for i in table.indices_of(Group::Minority) {
        let row = out.row_mut(i);
        for &j in &ex.mask {
            row[j] = pull(row[j], ex.c[j], ex.alpha);
        }
    }
    relabel(table, &mut out, labels);
    out
}

/// Update labels of rows whose features changed between `before` and `after`.
pub(crate) fn relabel(before: &DataTable, after: &mut DataTable, labels: LabelMode) {
    let LabelMode::Recompute(f) = labels else {
        return;
    };
    let shifts: Vec<f64> = (0..before.n_rows())
        .map(|i| {
            if before.row(i) == after.row(i) {
                0.0
            } else {
                f(after.row(i)) - f(before.row(i))
            }
        })
        .collect();
    if let Some(y) = after.label_mut() {
        for (yi, s) in y.iter_mut().zip(shifts) {
            if s != 0.0 {
                *yi += s;
            }
        }
    }
}
