//! Synthetic datasets for the three experiment designs, and seeded splitting.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::rng::{RandomSeed, Stream};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StereoError::parameter(format!(
            "{name} = {p} is not a probability"
        )));
    }
    Ok(())
}

/// How the "selected" label depends on the math attribute:
/// `Pr[selected | math] = base + effect * math`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionRule {
    pub base: f64,
    pub effect: f64,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self {
            base: 0.3,
            effect: 0.4,
        }
    }
}

impl SelectionRule {
    pub fn probability(&self, math: bool) -> f64 {
        self.base + if math { self.effect } else { 0.0 }
    }

    fn validate(&self) -> Result<()> {
        check_probability("selection base", self.base)?;
        check_probability("selection base + effect", self.base + self.effect)
    }
}

/// Parameters of the Naive Bayes dataset: a sensitive attribute, an
/// uninformative attribute, a "good at math" attribute whose rate depends on
/// the group, and a selection label driven by the math attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbDatasetConfig {
    pub n: usize,
    pub p_sensitive: f64,
    pub p_math_given_minority: f64,
    pub p_math_given_majority: f64,
    pub selection: SelectionRule,
}

impl Default for NbDatasetConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            p_sensitive: 0.5,
            p_math_given_minority: 0.6,
            p_math_given_majority: 0.4,
            selection: SelectionRule::default(),
        }
    }
}

/// Column names of the Naive Bayes dataset.
pub const NB_COLUMNS: [&str; 3] = ["sensitive", "random", "good_at_math"];
/// Index of the math attribute in the Naive Bayes dataset.
pub const NB_MATH_COLUMN: usize = 2;

pub fn generate_nb_dataset(cfg: &NbDatasetConfig, seed: RandomSeed) -> Result<DataTable> {
    if cfg.n < 2 {
        return Err(StereoError::parameter("nb dataset needs n >= 2"));
    }
    check_probability("p_sensitive", cfg.p_sensitive)?;
    check_probability("p_math_given_minority", cfg.p_math_given_minority)?;
    check_probability("p_math_given_majority", cfg.p_math_given_majority)?;
    cfg.selection.validate()?;

    let mut rng = seed.rng(Stream::Generate);
    let mut features = Vec::with_capacity(cfg.n * 3);
    let mut group = Vec::with_capacity(cfg.n);
    let mut label = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        // fixed draw order: sensitive, random, math, label
        let draws: [f64; 4] = rng.random();
        let minority = draws[0] < cfg.p_sensitive;
        let random = draws[1] < 0.5;
        let p_math = if minority {
            cfg.p_math_given_minority
        } else {
            cfg.p_math_given_majority
        };
        let math = draws[2] < p_math;
        let selected = draws[3] < cfg.selection.probability(math);
        features.extend([
            minority as u8 as f64,
            random as u8 as f64,
            math as u8 as f64,
        ]);
        group.push(if minority {
            Group::Minority
        } else {
            Group::Majority
        });
        label.push(selected as u8 as f64);
    }
    DataTable::from_flat(
        NB_COLUMNS.iter().map(|s| s.to_string()).collect(),
        features,
        group,
        Some(label),
    )
}

/// Column names of the regression dataset.
pub const REGRESSION_COLUMNS: [&str; 4] = ["sensitive", "x2", "x3", "x4"];

/// Noise-free part of the regression target, evaluated on a full row
/// `(sensitive, x2, x3, x4)`.
pub fn regression_target(row: &[f64]) -> f64 {
    -row[2] + 2.0 * row[3]
}

/// Regression dataset: uniform binary sensitive attribute, three
/// `Uniform[0, 1]` features and `y = -x3 + 2 x4 + noise`, with noise uniform
/// on `[-noise_halfwidth, noise_halfwidth]`.
pub fn generate_regression_dataset(
    n: usize,
    noise_halfwidth: f64,
    seed: RandomSeed,
) -> Result<DataTable> {
    if n < 2 {
        return Err(StereoError::parameter("regression dataset needs n >= 2"));
    }
    if !(noise_halfwidth >= 0.0) {
        return Err(StereoError::parameter(format!(
            "noise half-width {noise_halfwidth} must be >= 0"
        )));
    }
    let mut rng = seed.rng(Stream::Generate);
    let mut features = Vec::with_capacity(n * 4);
    let mut group = Vec::with_capacity(n);
    let mut label = Vec::with_capacity(n);
    for _ in 0..n {
        let draws: [f64; 5] = rng.random();
        let minority = draws[0] < 0.5;
        let row = [minority as u8 as f64, draws[1], draws[2], draws[3]];
        let noise = noise_halfwidth * (2.0 * draws[4] - 1.0);
        label.push(regression_target(&row) + noise);
        features.extend(row);
        group.push(if minority {
            Group::Minority
        } else {
            Group::Majority
        });
    }
    Ok(DataTable::from_flat(
        REGRESSION_COLUMNS.iter().map(|s| s.to_string()).collect(),
        features,
        group,
        Some(label),
    )?
    .with_label_name("y"))
}

/// Clustering dataset: two isotropic 2-D Gaussians centred at `(0, 0)` and
/// `(1, 1)`. Exactly half the rows are minority, and each group is split
/// evenly between the two modes. The mode is stored as the label.
pub fn generate_clustering_dataset(n: usize, std: f64, seed: RandomSeed) -> Result<DataTable> {
    if n == 0 || n % 4 != 0 {
        return Err(StereoError::parameter(format!(
            "clustering dataset needs n divisible by 4, got {n}"
        )));
    }
    if !(std >= 0.0) || !std.is_finite() {
        return Err(StereoError::parameter(format!(
            "std {std} must be finite and >= 0"
        )));
    }
    let mut rng = seed.rng(Stream::Generate);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // order[0..n/2] is the minority; inside each half the first quarter is mode 0
    let mut group = vec![Group::Majority; n];
    let mut mode = vec![0u8; n];
    for (pos, &i) in order.iter().enumerate() {
        if pos < n / 2 {
            group[i] = Group::Minority;
        }
        mode[i] = if pos % (n / 2) < n / 4 { 0 } else { 1 };
    }
    let mut features = Vec::with_capacity(n * 2);
    for &m in &mode {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let centre = m as f64;
        features.extend([centre + std * z0, centre + std * z1]);
    }
    DataTable::from_flat(
        vec!["x2".into(), "x3".into()],
        features,
        group,
        Some(mode.into_iter().map(f64::from).collect()),
    )
}

/// Seeded row partition; indices of each side are returned in ascending order.
pub fn split_indices(n: usize, ratio: f64, seed: RandomSeed) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(StereoError::parameter(format!(
            "split ratio {ratio} must lie in (0, 1)"
        )));
    }
    let n_train = (ratio * n as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.rng(Stream::Split));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Disjoint seeded train/test split with `floor(ratio * n)` training rows.
pub fn split_train_test(
    table: &DataTable,
    ratio: f64,
    seed: RandomSeed,
) -> Result<(DataTable, DataTable)> {
    let (train, test) = split_indices(table.n_rows(), ratio, seed)?;
    Ok((table.select_rows(&train)?, table.select_rows(&test)?))
}
