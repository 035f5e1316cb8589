//! Categorical Naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Result, StereoError};

/// Conditional probability table of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    /// Distinct training values, ascending.
    pub values: Vec<f64>,
    /// `probs[k][v] = Pr[x = values[v] | C_k]`.
    pub probs: Vec<Vec<f64>>,
    /// Probability assigned to a value never seen in training, per class.
    pub unseen: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub classes: Vec<f64>,
    pub priors: Vec<f64>,
    pub conditionals: Vec<FeatureTable>,
    pub smoothing: f64,
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl NaiveBayesModel {
    /// Fit on every class that appears in the training labels.
    pub fn fit(train: &DataTable, smoothing: f64) -> Result<Self> {
        let classes = distinct_sorted(train.require_label()?.iter().copied());
        Self::fit_with_classes(train, &classes, smoothing)
    }

    /// Fit with an explicit class set. A class without training rows is an
    /// error.
    pub fn fit_with_classes(train: &DataTable, classes: &[f64], smoothing: f64) -> Result<Self> {
        if !(smoothing >= 0.0) {
            return Err(StereoError::parameter(format!(
                "smoothing {smoothing} must be >= 0"
            )));
        }
        let labels = train.require_label()?;
        if classes.is_empty() {
            return Err(StereoError::Fit("no classes".into()));
        }
        let mut class_of = Vec::with_capacity(labels.len());
        for &y in labels {
            let k = classes
                .iter()
                .position(|&c| c == y)
                .ok_or_else(|| StereoError::Fit(format!("label {y} is not in the class set")))?;
            class_of.push(k);
        }
        let mut class_counts = vec![0usize; classes.len()];
        for &k in &class_of {
            class_counts[k] += 1;
        }
        if let Some(k) = class_counts.iter().position(|&c| c == 0) {
            return Err(StereoError::Fit(format!(
                "class {} has no training rows",
                classes[k]
            )));
        }
        let n = labels.len() as f64;
        let priors = class_counts.iter().map(|&c| c as f64 / n).collect();

        let conditionals = (0..train.n_cols())
            .map(|j| {
                let values = distinct_sorted(train.rows().map(|r| r[j]));
                let mut counts = vec![vec![0usize; values.len()]; classes.len()];
                for (row, &k) in train.rows().zip(&class_of) {
                    let v = values
                        .binary_search_by(|x| x.total_cmp(&row[j]))
                        .expect("value collected above");
                    counts[k][v] += 1;
                }
                let n_values = values.len() as f64;
                let probs = counts
                    .iter()
                    .zip(&class_counts)
                    .map(|(row, &nc)| {
                        row.iter()
                            .map(|&c| (c as f64 + smoothing) / (nc as f64 + smoothing * n_values))
                            .collect()
                    })
                    .collect();
                let unseen = class_counts
                    .iter()
                    .map(|&nc| smoothing / (nc as f64 + smoothing * n_values))
                    .collect();
                FeatureTable {
                    values,
                    probs,
                    unseen,
                }
            })
            .collect();

        Ok(Self {
            classes: classes.to_vec(),
            priors,
            conditionals,
            smoothing,
        })
    }

    pub fn n_features(&self) -> usize {
        self.conditionals.len()
    }

    /// `ln Pr[C_k] + sum_i ln Pr[x_i | C_k]` for every class. Zero
    /// probabilities give `-inf`.
    pub fn class_log_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(StereoError::structural(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features()
            )));
        }
        Ok((0..self.classes.len())
            .map(|k| {
                let mut score = self.priors[k].ln();
                for (table, &x) in self.conditionals.iter().zip(row) {
                    let p = match table.values.binary_search_by(|v| v.total_cmp(&x)) {
                        Ok(v) => table.probs[k][v],
                        Err(_) => table.unseen[k],
                    };
                    score += p.ln();
                }
                score
            })
            .collect())
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let scores = self.class_log_scores(row)?;
        Ok(self.classes[argmax_first(&scores)])
    }

    pub fn predict_table(&self, table: &DataTable) -> Result<Vec<f64>> {
        table.rows().map(|r| self.predict(r)).collect()
    }
}

/// Index of the first maximum; `-inf` everywhere yields 0.
pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;

    fn table(rows: &[[f64; 2]], labels: &[f64]) -> DataTable {
        DataTable::from_rows(
            vec!["a".into(), "b".into()],
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
            vec![Group::Majority; rows.len()],
            Some(labels.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn single_class_prior_is_one() {
        let m = NaiveBayesModel::fit(&table(&[[0.0, 1.0], [1.0, 1.0]], &[1.0, 1.0]), 1.0).unwrap();
        assert_eq!(m.priors, vec![1.0]);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn four_row_counts() {
        // class 0: rows (0,0), (0,1); class 1: rows (1,1), (0,1)
        let t = table(
            &[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
        );
        let m = NaiveBayesModel::fit(&t, 0.0).unwrap();
        assert_eq!(m.priors, vec![0.5, 0.5]);
        // feature a: class 0 -> {0: 2/2, 1: 0/2}, class 1 -> {0: 1/2, 1: 1/2}
        assert_eq!(
            m.conditionals[0].probs,
            vec![vec![1.0, 0.0], vec![0.5, 0.5]]
        );
        // feature b: class 0 -> {0: 1/2, 1: 1/2}, class 1 -> {0: 0, 1: 1}
        assert_eq!(
            m.conditionals[1].probs,
            vec![vec![0.5, 0.5], vec![0.0, 1.0]]
        );

        let smoothed = NaiveBayesModel::fit(&t, 1.0).unwrap();
        assert_eq!(
            smoothed.conditionals[0].probs[0],
            vec![3.0 / 4.0, 1.0 / 4.0]
        );
    }

    #[test]
    fn unsmoothed_zero_still_predicts() {
        let t = table(
            &[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
        );
        let m = NaiveBayesModel::fit(&t, 0.0).unwrap();
        // a = 1 is impossible under class 0, b = 0 impossible under class 1
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 0.0);
        // both classes impossible: tie at -inf goes to the first class
        assert_eq!(m.predict(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_model_ties_to_first_class() {
        let t = table(
            &[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
        );
        let m = NaiveBayesModel::fit(&t, 1.0).unwrap();
        assert_eq!(m.predict(&[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn empty_class_is_fit_error() {
        let t = table(&[[0.0, 0.0], [1.0, 1.0]], &[0.0, 0.0]);
        assert!(matches!(
            NaiveBayesModel::fit_with_classes(&t, &[0.0, 1.0], 1.0),
            Err(StereoError::Fit(_))
        ));
    }

    #[test]
    fn brute_force_posterior_matches() {
        let t = table(
            &[
                [0.0, 0.0],
                [0.0, 1.0],
                [1.0, 1.0],
                [1.0, 1.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [1.0, 1.0],
            ],
            &[0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        );
        let m = NaiveBayesModel::fit(&t, 0.5).unwrap();
        for a in [0.0, 1.0] {
            for b in [0.0, 1.0] {
                // posterior by direct product of probabilities, no logs
                let post: Vec<f64> = (0..2)
                    .map(|k| {
                        let ia = m.conditionals[0]
                            .values
                            .iter()
                            .position(|&v| v == a)
                            .unwrap();
                        let ib = m.conditionals[1]
                            .values
                            .iter()
                            .position(|&v| v == b)
                            .unwrap();
                        m.priors[k]
                            * m.conditionals[0].probs[k][ia]
                            * m.conditionals[1].probs[k][ib]
                    })
                    .collect();
                let expected = if post[1] > post[0] { 1.0 } else { 0.0 };
                assert_eq!(m.predict(&[a, b]).unwrap(), expected, "input ({a}, {b})");
            }
        }
    }

    #[test]
    fn scaled_scores_do_not_change_prediction() {
        let t = table(
            &[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0, 1.0],
        );
        let m = NaiveBayesModel::fit(&t, 1.0).unwrap();
        let mut scaled = m.clone();
        // multiplying every class score by 1e-200 shifts every log score equally
        for p in scaled.priors.iter_mut() {
            *p *= 1e-200;
        }
        for a in [0.0, 1.0] {
            for b in [0.0, 1.0] {
                assert_eq!(
                    m.predict(&[a, b]).unwrap(),
                    scaled.predict(&[a, b]).unwrap()
                );
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = NaiveBayesModel::fit(&table(&[[0.0, 0.0]], &[1.0]), 1.0).unwrap();
        assert!(m.predict(&[0.0]).is_err());
    }
}
