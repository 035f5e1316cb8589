use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StereoError};

/// Group membership of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Group {
    /// Privileged / unstereotyped group (`0`).
    Majority,
    /// Protected / stereotyped group (`1`).
    Minority,
}

impl Group {
    pub fn as_u8(self) -> u8 {
        match self {
            Group::Majority => 0,
            Group::Minority => 1,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::Majority => Group::Minority,
            Group::Minority => Group::Majority,
        }
    }
}

impl From<Group> for u8 {
    fn from(g: Group) -> u8 {
        g.as_u8()
    }
}

impl TryFrom<u8> for Group {
    type Error = StereoError;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Group::Majority),
            1 => Ok(Group::Minority),
            other => Err(StereoError::structural(format!(
                "group value {other} is not 0 or 1"
            ))),
        }
    }
}

impl TryFrom<f64> for Group {
    type Error = StereoError;

    fn try_from(v: f64) -> Result<Self> {
        if v == 0.0 {
            Ok(Group::Majority)
        } else if v == 1.0 {
            Ok(Group::Minority)
        } else {
            Err(StereoError::structural(format!(
                "group value {v} is not 0 or 1"
            )))
        }
    }
}

/// Name used for the label column when none is given.
pub const DEFAULT_LABEL_NAME: &str = "label";

/// An n×d numeric feature matrix with a group column and an optional label.
///
/// Features are stored row-major. The group column is kept apart from the
/// features; generators that treat the sensitive attribute as a regressor
/// also copy it into a feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    column_names: Vec<String>,
    n_rows: usize,
    features: Vec<f64>,
    group: Vec<Group>,
    label: Option<Vec<f64>>,
    label_name: String,
}

impl DataTable {
    /// Build a table from row vectors.
    pub fn from_rows(
        column_names: Vec<String>,
        rows: &[Vec<f64>],
        group: Vec<Group>,
        label: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = column_names.len();
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(StereoError::structural(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(column_names, features, group, label)
    }

    /// Build a table from a row-major buffer.
    pub fn from_flat(
        column_names: Vec<String>,
        features: Vec<f64>,
        group: Vec<Group>,
        label: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = column_names.len();
        if d == 0 {
            return Err(StereoError::structural(
                "table needs at least one feature column",
            ));
        }
        let n = group.len();
        if n == 0 {
            return Err(StereoError::structural("table needs at least one row"));
        }
        if features.len() != n * d {
            return Err(StereoError::structural(format!(
                "feature buffer has {} values, expected {n}x{d}",
                features.len()
            )));
        }
        if let Some(l) = &label {
            if l.len() != n {
                return Err(StereoError::structural(format!(
                    "label has {} entries, expected {n}",
                    l.len()
                )));
            }
        }
        Ok(Self {
            column_names,
            n_rows: n,
            features,
            group,
            label,
            label_name: DEFAULT_LABEL_NAME.to_string(),
        })
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.n_cols();
        &mut self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_cols())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_cols() + j]
    }

    pub fn set_value(&mut self, i: usize, j: usize, v: f64) {
        let d = self.n_cols();
        self.features[i * d + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn groups(&self) -> &[Group] {
        &self.group
    }

    pub fn group(&self, i: usize) -> Group {
        self.group[i]
    }

    pub fn label(&self) -> Option<&[f64]> {
        self.label.as_deref()
    }

    pub fn label_mut(&mut self) -> Option<&mut [f64]> {
        self.label.as_deref_mut()
    }

    /// Label column, or a structural error when the table has none.
    pub fn require_label(&self) -> Result<&[f64]> {
        self.label()
            .ok_or_else(|| StereoError::structural("operation needs a label column"))
    }

    pub fn set_label(&mut self, label: Option<Vec<f64>>) -> Result<()> {
        if let Some(l) = &label {
            if l.len() != self.n_rows {
                return Err(StereoError::structural(format!(
                    "label has {} entries, expected {}",
                    l.len(),
                    self.n_rows
                )));
            }
        }
        self.label = label;
        Ok(())
    }

    /// Row indices belonging to `g`, ascending.
    pub fn indices_of(&self, g: Group) -> Vec<usize> {
        (0..self.n_rows).filter(|&i| self.group[i] == g).collect()
    }

    pub fn count_of(&self, g: Group) -> usize {
        self.group.iter().filter(|&&x| x == g).count()
    }

    /// Error unless both groups have at least one row.
    pub fn require_both_groups(&self) -> Result<()> {
        for g in [Group::Minority, Group::Majority] {
            if self.count_of(g) == 0 {
                return Err(StereoError::structural(format!("group {:?} is empty", g)));
            }
        }
        Ok(())
    }

    /// New table with the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let d = self.n_cols();
        let mut features = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        let group = idx.iter().map(|&i| self.group[i]).collect();
        let label = self
            .label
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        Ok(
            Self::from_flat(self.column_names.clone(), features, group, label)?
                .with_label_name(self.label_name.clone()),
        )
    }

    /// New table restricted to the given feature columns; group and label
    /// are carried over.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.n_cols()) {
            return Err(StereoError::structural(format!(
                "column index {bad} out of range"
            )));
        }
        let names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        let mut features = Vec::with_capacity(self.n_rows * cols.len());
        for r in self.rows() {
            features.extend(cols.iter().map(|&j| r[j]));
        }
        Ok(
            Self::from_flat(names, features, self.group.clone(), self.label.clone())?
                .with_label_name(self.label_name.clone()),
        )
    }

    /// Features as an nalgebra matrix (the design matrix for regression).
    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols(), &self.features)
    }

    pub fn label_vector(&self) -> Result<DVector<f64>> {
        Ok(DVector::from_column_slice(self.require_label()?))
    }
}

/// Per-group means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mu_minority: Vec<f64>,
    pub mu_majority: Vec<f64>,
    pub count_minority: usize,
    pub count_majority: usize,
}

/// Arithmetic mean of each group's rows.
pub fn group_stats(table: &DataTable) -> Result<GroupStats> {
    table.require_both_groups()?;
    let d = table.n_cols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (row, g) in table.rows().zip(table.groups()) {
        let k = g.as_u8() as usize;
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(row) {
            *s += v;
        }
    }
    let [maj, min] = sums;
    let mean = |s: Vec<f64>, c: usize| s.into_iter().map(|x| x / c as f64).collect::<Vec<_>>();
    Ok(GroupStats {
        mu_minority: mean(min, counts[1]),
        mu_majority: mean(maj, counts[0]),
        count_minority: counts[1],
        count_majority: counts[0],
    })
}
