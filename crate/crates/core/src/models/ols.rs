//! Ordinary least squares and the rank-2 coefficient update for a
//! single-coordinate exemplar pull.
//!
//! Pulling coordinate `s` of every minority row toward `c_s` changes the
//! design to `X' = X + e u^T`, where `u` is the `s`-th basis vector and
//! `e_j = alpha (c_s - x_js)` on minority rows (zero elsewhere). Expanding
//! the Gram matrix gives
//!
//! ```text
//! X'^T X' = X^T X + w u^T + u w^T,   w = X^T e + (e^T e / 2) u
//! w_i = alpha (m c_s mu_i - P_i . P_s)                                   (i != s)
//! w_s = alpha (m c_s mu_s - |P_s|^2) + alpha^2 (m c_s^2 - 2 m c_s mu_s + |P_s|^2) / 2
//! ```
//!
//! with `m` the minority count, `mu` the minority mean and `P_i` the
//! minority part of column `i`. With `U = [w u]`, `V = [u w]^T` the Woodbury
//! identity gives `(X'^T X')^-1 = A^-1 - A^-1 M A^-1` for `A = X^T X` and
//! `M = U (I_2 + V A^-1 U)^-1 V`, hence
//!
//! ```text
//! beta' = A^-1 X'^T y  -  A^-1 M A^-1 X'^T y  =  p1 - p2
//! ```

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::data::{DataTable, Group};
use crate::error::{Result, StereoError};
use crate::transforms::{apply_exemplar, ExemplarPoint, ExemplarSpec, LabelMode};

/// Gram matrices with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Above this condition estimate a numerical caveat is logged.
pub const WARN_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub beta: Vec<f64>,
    /// `(X^T X)^-1`, kept for rank updates.
    pub gram_inverse: DMatrix<f64>,
    /// `X^T y` of the training data.
    pub xty: Vec<f64>,
    /// Eigenvalue-ratio condition estimate of `X^T X`.
    pub condition: f64,
}

impl LinearFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.beta).map(|(x, b)| x * b).sum()
    }

    pub fn predict_table(&self, table: &DataTable) -> Vec<f64> {
        table.rows().map(|r| self.predict(r)).collect()
    }
}

/// Least-squares coefficients from the normal equations, solved through a
/// Cholesky factorization of `X^T X`.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(StereoError::structural(format!(
            "X has {n} rows but y has {}",
            y.len()
        )));
    }
    if n < d {
        return Err(StereoError::Singular(format!(
            "{n} rows cannot determine {d} coefficients"
        )));
    }
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;
    fit_from_gram(gram, xty)
}

pub fn ols_fit_table(table: &DataTable) -> Result<LinearFit> {
    ols_fit(&table.design_matrix(), &table.label_vector()?)
}

fn fit_from_gram(gram: DMatrix<f64>, xty: DVector<f64>) -> Result<LinearFit> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(StereoError::Singular(format!(
            "X^T X condition estimate {condition:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    if condition > WARN_CONDITION {
        warn!("X^T X is ill-conditioned (condition estimate {condition:e}); coefficients may be inaccurate");
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| StereoError::Singular("X^T X is not positive definite".into()))?;
    let beta = chol.solve(&xty);
    Ok(LinearFit {
        beta: beta.iter().copied().collect(),
        gram_inverse: chol.inverse(),
        xty: xty.iter().copied().collect(),
        condition,
    })
}

/// Pull of a single coordinate `s` of the minority rows toward `c_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub coordinate: usize,
    pub alpha: f64,
    pub exemplar_value: f64,
}

impl PerturbationSpec {
    fn as_exemplar(&self) -> ExemplarSpec {
        ExemplarSpec::new(
            ExemplarPoint::Point(vec![self.exemplar_value]),
            self.alpha,
            Some(vec![self.coordinate]),
        )
    }
}

/// Minority rows get `x_s <- (1 - alpha) x_s + alpha c_s`; every other value,
/// the label included, stays fixed.
pub fn perturb_single_coordinate(table: &DataTable, spec: &PerturbationSpec) -> Result<DataTable> {
    apply_exemplar(table, &spec.as_exemplar(), LabelMode::Fixed)
}

/// Ingredients of the rank-2 update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoodburyUpdate {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    /// `U (I_2 + V A^-1 U)^-1 V`.
    pub m: DMatrix<f64>,
    /// `A^-1 X'^T y`.
    pub p1: Vec<f64>,
    /// `A^-1 M A^-1 X'^T y`.
    pub p2: Vec<f64>,
    /// The inner 2x2 system was singular and the coefficients come from a
    /// direct refit instead.
    pub fallback: bool,
}

/// Determinants of the inner system below this count as singular.
const INNER_DET_FLOOR: f64 = 1e-12;

/// Coefficients after a single-coordinate pull, obtained from the existing
/// fit through the Woodbury identity without refactorizing `X'^T X'`.
/// `fit` must have been trained on `table`'s features and label.
pub fn woodbury_beta_update(
    fit: &LinearFit,
    table: &DataTable,
    spec: &PerturbationSpec,
) -> Result<(LinearFit, WoodburyUpdate)> {
    let d = table.n_cols();
    let s = spec.coordinate;
    if s >= d {
        return Err(StereoError::structural(format!(
            "coordinate {s} out of range for {d} features"
        )));
    }
    if fit.beta.len() != d {
        return Err(StereoError::structural(
            "fit and table disagree on the number of features",
        ));
    }
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(StereoError::parameter(format!(
            "alpha = {} must lie in [0, 1]",
            spec.alpha
        )));
    }
    let y = table.require_label()?;
    let alpha = spec.alpha;
    let c = spec.exemplar_value;

    // minority statistics: m, m * mu, P_i . P_s, sum y, P_s . y
    let minority = table.indices_of(Group::Minority);
    let m = minority.len() as f64;
    let mut sum = vec![0.0; d];
    let mut cross_s = vec![0.0; d];
    let mut sum_y = 0.0;
    let mut s_dot_y = 0.0;
    for &j in &minority {
        let row = table.row(j);
        for i in 0..d {
            sum[i] += row[i];
            cross_s[i] += row[i] * row[s];
        }
        sum_y += y[j];
        s_dot_y += row[s] * y[j];
    }
    let mu: Vec<f64> = sum
        .iter()
        .map(|v| if m > 0.0 { v / m } else { 0.0 })
        .collect();

    let mut w: Vec<f64> = (0..d)
        .map(|i| alpha * (m * c * mu[i] - cross_s[i]))
        .collect();
    w[s] += alpha * alpha * (m * c * c - 2.0 * m * c * mu[s] + cross_s[s]) / 2.0;
    let mut u = vec![0.0; d];
    u[s] = 1.0;

    // X'^T y differs from X^T y only in entry s, by e^T y
    let mut xty_new = DVector::from_column_slice(&fit.xty);
    xty_new[s] += alpha * (c * sum_y - s_dot_y);

    let a_inv = &fit.gram_inverse;
    let w_vec = DVector::from_column_slice(&w);
    let u_vec = DVector::from_column_slice(&u);
    let big_u = DMatrix::from_columns(&[w_vec.clone(), u_vec.clone()]);
    let big_v = big_u.columns(0, 2).transpose().select_rows(&[1, 0]);
    let inner = DMatrix::<f64>::identity(2, 2) + &big_v * a_inv * &big_u;
    let inner2 = Matrix2::new(inner[(0, 0)], inner[(0, 1)], inner[(1, 0)], inner[(1, 1)]);
    let det = inner2.determinant();

    if !(det.abs() > INNER_DET_FLOOR) {
        warn!("Woodbury inner system is singular (det = {det:e}); refitting directly");
        let refit = ols_fit_table(&perturb_single_coordinate(table, spec)?)?;
        let update = WoodburyUpdate {
            w,
            u,
            m: DMatrix::zeros(d, d),
            p1: refit.beta.clone(),
            p2: vec![0.0; d],
            fallback: true,
        };
        return Ok((refit, update));
    }
    let inner_inv = inner2.try_inverse().expect("determinant checked above");
    let inner_inv = DMatrix::from_iterator(2, 2, inner_inv.iter().copied());
    let big_m = &big_u * inner_inv * &big_v;

    let p1 = a_inv * &xty_new;
    let a_inv_m = a_inv * &big_m;
    let p2 = &a_inv_m * &p1;
    let beta = &p1 - &p2;
    let gram_inverse = a_inv - &a_inv_m * a_inv;

    let fit_new = LinearFit {
        beta: beta.iter().copied().collect(),
        gram_inverse,
        xty: xty_new.iter().copied().collect(),
        condition: f64::NAN,
    };
    let update = WoodburyUpdate {
        w,
        u,
        m: big_m,
        p1: p1.iter().copied().collect(),
        p2: p2.iter().copied().collect(),
        fallback: false,
    };
    Ok((fit_new, update))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_regression_dataset;
    use crate::rng::RandomSeed;
    use rand::Rng;

    /// Least squares through Householder QR of X, written out here so the
    /// check does not share code with the Cholesky path.
    fn qr_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let (n, d) = x.shape();
        let mut a = x.clone();
        let mut b = y.clone();
        for k in 0..d {
            let norm: f64 = (k..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
            let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k..n).map(|i| a[(i, k)]).collect();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            for col in k..d {
                let dot: f64 = (k..n).map(|i| v[i - k] * a[(i, col)]).sum();
                for i in k..n {
                    a[(i, col)] -= 2.0 * v[i - k] * dot / vnorm2;
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * b[i]).sum();
            for i in k..n {
                b[i] -= 2.0 * v[i - k] * dot / vnorm2;
            }
        }
        let mut beta = vec![0.0; d];
        for k in (0..d).rev() {
            let tail: f64 = (k + 1..d).map(|j| a[(k, j)] * beta[j]).sum();
            beta[k] = (b[k] - tail) / a[(k, k)];
        }
        beta
    }

    #[test]
    fn exact_single_column_fit() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_column_slice(&[2.0, 4.0, 6.0]);
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_regression_recovers_coefficients() {
        let t = generate_regression_dataset(2000, 0.0, RandomSeed(3)).unwrap();
        let fit = ols_fit_table(&t).unwrap();
        for (b, e) in fit.beta.iter().zip([0.0, 0.0, -1.0, 2.0]) {
            assert!((b - e).abs() < 1e-10, "{:?}", fit.beta);
        }
    }

    #[test]
    fn matches_qr_on_random_systems() {
        let mut rng = RandomSeed(17).rng(crate::rng::Stream::Generate);
        for _ in 0..20 {
            let x = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let y = DVector::from_fn(10, |_, _| rng.random::<f64>());
            let fit = ols_fit(&x, &y).unwrap();
            let oracle = qr_least_squares(&x, &y);
            for (a, b) in fit.beta.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10);
            }
            // residual orthogonal to the column space
            let r = &y - &x * DVector::from_column_slice(&fit.beta);
            let xty = x.transpose() * &y;
            assert!((x.transpose() * r).norm() <= 1e-8 * xty.norm());
        }
    }

    #[test]
    fn rank_deficient_is_singular() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(ols_fit(&x, &y), Err(StereoError::Singular(_))));
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            ols_fit(&x, &DVector::from_column_slice(&[1.0])),
            Err(StereoError::Singular(_))
        ));
    }

    #[test]
    fn single_coordinate_arithmetic() {
        let t = DataTable::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![7.0, 0.2], vec![7.0, 0.2]],
            vec![Group::Minority, Group::Majority],
            Some(vec![1.0, 1.0]),
        )
        .unwrap();
        let spec = PerturbationSpec {
            coordinate: 1,
            alpha: 0.5,
            exemplar_value: 1.0,
        };
        let out = perturb_single_coordinate(&t, &spec).unwrap();
        assert!((out.value(0, 1) - 0.6).abs() < 1e-15);
        assert_eq!(out.value(0, 0), 7.0);
        assert_eq!(out.row(1), t.row(1));
        assert_eq!(out.label(), t.label());
        let zero = PerturbationSpec { alpha: 0.0, ..spec };
        assert_eq!(perturb_single_coordinate(&t, &zero).unwrap(), t);
    }

    #[test]
    fn alpha_zero_update_is_identity() {
        let t = generate_regression_dataset(200, 0.1, RandomSeed(4)).unwrap();
        let fit = ols_fit_table(&t).unwrap();
        let spec = PerturbationSpec {
            coordinate: 2,
            alpha: 0.0,
            exemplar_value: 0.9,
        };
        let (new, upd) = woodbury_beta_update(&fit, &t, &spec).unwrap();
        assert!(upd.m.iter().all(|&v| v == 0.0));
        for (a, b) in new.beta.iter().zip(&fit.beta) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_two_gram_identity() {
        let t = generate_regression_dataset(200, 0.1, RandomSeed(5)).unwrap();
        let fit = ols_fit_table(&t).unwrap();
        for s in 0..4 {
            let spec = PerturbationSpec {
                coordinate: s,
                alpha: 0.7,
                exemplar_value: 0.1,
            };
            let (_, upd) = woodbury_beta_update(&fit, &t, &spec).unwrap();
            let x = t.design_matrix();
            let xp = perturb_single_coordinate(&t, &spec)
                .unwrap()
                .design_matrix();
            let w = DVector::from_column_slice(&upd.w);
            let u = DVector::from_column_slice(&upd.u);
            let updated = x.transpose() * &x + &w * u.transpose() + &u * w.transpose();
            let direct = xp.transpose() * &xp;
            assert!(
                (updated - &direct).norm() <= 1e-8 * direct.norm(),
                "coordinate {s}"
            );
        }
    }

    #[test]
    fn update_matches_refit() {
        let t = generate_regression_dataset(200, 0.1, RandomSeed(6)).unwrap();
        let fit = ols_fit_table(&t).unwrap();
        for s in 0..4 {
            for alpha in [0.1, 0.5, 0.9, 1.0] {
                let spec = PerturbationSpec {
                    coordinate: s,
                    alpha,
                    exemplar_value: 0.3,
                };
                let (new, upd) = woodbury_beta_update(&fit, &t, &spec).unwrap();
                let refit = ols_fit_table(&perturb_single_coordinate(&t, &spec).unwrap()).unwrap();
                for (a, b) in new.beta.iter().zip(&refit.beta) {
                    assert!((a - b).abs() <= 1e-8, "s={s} alpha={alpha}");
                }
                for i in 0..4 {
                    assert!((upd.p1[i] - upd.p2[i] - new.beta[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn singular_inner_system_falls_back() {
        // minority rows all have x_1 = 0 except through the pull; with one
        // binary column and alpha = 1 toward 0 the perturbed design loses rank
        let t = DataTable::from_rows(
            vec!["g".into(), "x".into()],
            &[
                vec![1.0, 1.0],
                vec![1.0, 2.0],
                vec![0.0, 1.0],
                vec![0.0, 3.0],
            ],
            vec![
                Group::Minority,
                Group::Minority,
                Group::Majority,
                Group::Majority,
            ],
            Some(vec![1.0, 2.0, 3.0, 4.0]),
        )
        .unwrap();
        let fit = ols_fit_table(&t).unwrap();
        // pulling column g of the minority to 0 makes g identically zero
        let spec = PerturbationSpec {
            coordinate: 0,
            alpha: 1.0,
            exemplar_value: 0.0,
        };
        let res = woodbury_beta_update(&fit, &t, &spec);
        // the refit itself is singular, so the fallback surfaces that error
        assert!(matches!(res, Err(StereoError::Singular(_))));
    }
}
