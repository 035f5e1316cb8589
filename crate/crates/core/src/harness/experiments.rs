//! The four experiment runners. Each sweep cell regenerates nothing: the
//! base dataset is drawn once per run (per lambda target for `nb`) so all
//! cells share the same underlying individuals.

use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{ExperimentResult, RowSink, Variant};
use crate::data::{
    generate_clustering_dataset, generate_nb_dataset, generate_regression_dataset,
    regression_target, split_train_test, DataTable, Group, NbDatasetConfig, NB_COLUMNS,
    NB_MATH_COLUMN,
};
use crate::error::{Result, StereoError};
use crate::metrics::{adjusted_rand_index, balance, selection_report};
use crate::mitigation::{
    mitigate_exemplar, mitigate_exemplar_with_labels, mitigate_representativeness_table, WaeParams,
};
use crate::models::{
    fairlet_kmeans, kmeans, ols_fit_table, perturb_single_coordinate, woodbury_beta_update,
    NaiveBayesModel, PerturbationSpec,
};
use crate::transforms::{
    apply_exemplar, apply_representativeness, ExemplarPoint, ExemplarSpec, LabelMode,
    RepresentativenessSpec, TypeDistribution,
};

/// Features pulled in the regression experiments: x2, x3, x4.
pub const REGRESSION_MASK: [usize; 3] = [1, 2, 3];

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(StereoError::parameter(format!(
            "config is for '{}', not '{}'",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    cfg.validate()
}

fn is_refusal(e: &StereoError) -> bool {
    matches!(
        e,
        StereoError::Saturation { .. }
            | StereoError::NoCandidate { .. }
            | StereoError::Collapse { .. }
    )
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.experiment {
        ExperimentKind::Nb => run_nb_experiment(cfg),
        ExperimentKind::Regression => run_regression_experiment(cfg),
        ExperimentKind::Clustering => run_clustering_experiment(cfg),
        ExperimentKind::Postprocess => run_postprocess_demo(cfg),
    }
}

// ---------------------------------------------------------------- nb

fn nb_metrics(
    sink: &mut RowSink,
    table: &DataTable,
    cfg: &ExperimentConfig,
    sweep_param: &str,
    value: f64,
    variant: Variant,
) -> Result<()> {
    let (train, test) = split_train_test(table, cfg.split_ratio(), cfg.seed)?;
    let model = NaiveBayesModel::fit(&train, cfg.smoothing())?;
    let predictions = model.predict_table(&test)?;
    let report = selection_report(&predictions, test.groups())?;
    let truth = test.require_label()?;
    let accuracy = predictions
        .iter()
        .zip(truth)
        .filter(|(p, y)| p == y)
        .count() as f64
        / predictions.len() as f64;
    let dist = TypeDistribution::from_table(table, NB_MATH_COLUMN, Group::Minority)?;
    let math = dist.type_index(1.0).map_or(0.0, |t| dist.p_given_g[t]);
    let m = "representativeness";
    sink.push(
        m,
        sweep_param,
        value,
        variant,
        "selected_minority",
        report.minority.selected as f64,
    );
    sink.push(
        m,
        sweep_param,
        value,
        variant,
        "selected_majority",
        report.majority.selected as f64,
    );
    sink.push(
        m,
        sweep_param,
        value,
        variant,
        "rate_minority",
        report.minority.rate,
    );
    sink.push(
        m,
        sweep_param,
        value,
        variant,
        "rate_majority",
        report.majority.rate,
    );
    sink.push(
        m,
        sweep_param,
        value,
        variant,
        "rate_disparity",
        report.rate_disparity,
    );
    sink.push(m, sweep_param, value, variant, "accuracy", accuracy);
    sink.push(m, sweep_param, value, variant, "p_math_minority", math);
    Ok(())
}

/// Representativeness stereotyping of the "good at math" attribute followed
/// by Naive Bayes selection. For each lambda target the majority rate is
/// `p_math_given_majority` and the minority rate is `lambda` times that.
pub fn run_nb_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::Nb)?;
    let wae = WaeParams {
        epsilon: cfg.epsilon(),
    };
    let mut sink = RowSink::new("nb", cfg.seed.0);
    let mut refused = 0;
    let mut cells = Vec::new();
    let base_rate = cfg.p_math_given_majority();
    for lambda in cfg.lambda_targets() {
        let data_cfg = NbDatasetConfig {
            n: cfg.n(),
            p_sensitive: cfg.p_sensitive(),
            p_math_given_minority: lambda * base_rate,
            p_math_given_majority: base_rate,
            selection: cfg.selection(),
        };
        let base = generate_nb_dataset(&data_cfg, cfg.seed)?;
        let sweep_param = format!("rho|lambda={lambda}");
        for rho in cfg.sweep() {
            nb_metrics(&mut sink, &base, cfg, &sweep_param, rho, Variant::Baseline)?;
            let spec = RepresentativenessSpec::new(rho, NB_COLUMNS[NB_MATH_COLUMN]);
            let stereotyped = apply_representativeness(&base, &spec, cfg.seed)?;
            nb_metrics(
                &mut sink,
                &stereotyped,
                cfg,
                &sweep_param,
                rho,
                Variant::Stereotyped,
            )?;
            let mitigated = mitigate_representativeness_table(
                &stereotyped,
                NB_MATH_COLUMN,
                Group::Minority,
                &wae,
                cfg.seed.derive(1),
            );
            let status = match mitigated {
                Ok((est, table)) => {
                    nb_metrics(
                        &mut sink,
                        &table,
                        cfg,
                        &sweep_param,
                        rho,
                        Variant::Mitigated,
                    )?;
                    sink.push(
                        "representativeness",
                        &sweep_param,
                        rho,
                        Variant::Mitigated,
                        "rho_hat",
                        est.rho_hat,
                    );
                    sink.push(
                        "representativeness",
                        &sweep_param,
                        rho,
                        Variant::Mitigated,
                        "saturated",
                        0.0,
                    );
                    serde_json::to_value(est.status).expect("status serializes")
                }
                Err(e) if is_refusal(&e) => {
                    refused += 1;
                    sink.push(
                        "representativeness",
                        &sweep_param,
                        rho,
                        Variant::Mitigated,
                        "saturated",
                        1.0,
                    );
                    json!("saturated")
                }
                Err(e) => return Err(e),
            };
            cells.push(json!({ "lambda": lambda, "rho": rho, "status": status }));
        }
    }
    let summary = json!({
        "experiment": "nb",
        "epsilon": wae.epsilon,
        "n": cfg.n(),
        "lambda_targets": cfg.lambda_targets(),
        "sweep": cfg.sweep(),
        "cells": cells,
    });
    finish(
        sink,
        vec![("epsilon".into(), wae.epsilon.to_string())],
        summary,
        refused,
    )
}

fn finish(
    sink: RowSink,
    notes: Vec<(String, String)>,
    summary: serde_json::Value,
    refused_cells: usize,
) -> Result<ExperimentResult> {
    let mut result = ExperimentResult {
        experiment: sink.experiment,
        rows: sink.rows,
        notes,
        summary,
        refused_cells,
    };
    result.sort_rows();
    Ok(result)
}

// ---------------------------------------------------------- regression

/// Minority row with the lowest target; ties go to the lowest index.
pub fn lowest_target_minority_row(table: &DataTable) -> Result<usize> {
    let y = table.require_label()?;
    table
        .indices_of(Group::Minority)
        .into_iter()
        .min_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)))
        .ok_or_else(|| StereoError::structural("table has no minority rows"))
}

fn regression_metrics(
    sink: &mut RowSink,
    table: &DataTable,
    base_beta: &[f64],
    alpha: f64,
    variant: Variant,
) -> Result<()> {
    regression_metrics_on(sink, table, table, base_beta, alpha, variant)
}

/// Fit on `train`, report group means of the predictions on `eval` and the
/// Euclidean distance of the coefficients from `base_beta`.
fn regression_metrics_on(
    sink: &mut RowSink,
    train: &DataTable,
    eval: &DataTable,
    base_beta: &[f64],
    alpha: f64,
    variant: Variant,
) -> Result<()> {
    let fit = ols_fit_table(train)?;
    let predictions = fit.predict_table(eval);
    let report = selection_report(&predictions, eval.groups())?;
    let m = "subspace";
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "mean_pred_minority",
        report.minority.mean,
    );
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "mean_pred_majority",
        report.majority.mean,
    );
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "mean_disparity",
        report.mean_disparity,
    );
    for (name, b) in eval.column_names().iter().zip(&fit.beta) {
        sink.push(m, "alpha", alpha, variant, &format!("beta_{name}"), *b);
    }
    let shift = fit
        .beta
        .iter()
        .zip(base_beta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    sink.push(m, "alpha", alpha, variant, "beta_shift", shift);
    Ok(())
}

struct RegressionRun {
    base: DataTable,
    exemplar_row: usize,
    sink: RowSink,
    refused: usize,
    cells: Vec<serde_json::Value>,
}

fn regression_sweep(
    cfg: &ExperimentConfig,
    experiment: &str,
    postprocess: bool,
) -> Result<RegressionRun> {
    let wae = WaeParams {
        epsilon: cfg.epsilon(),
    };
    let base = generate_regression_dataset(cfg.n(), cfg.noise_halfwidth(), cfg.seed)?;
    let exemplar_row = lowest_target_minority_row(&base)?;
    let recompute = LabelMode::Recompute(regression_target);
    let base_fit = ols_fit_table(&base)?;
    let mut sink = RowSink::new(experiment, cfg.seed.0);
    let mut refused = 0;
    let mut cells = Vec::new();
    for alpha in cfg.sweep() {
        regression_metrics(
            &mut sink,
            &base,
            base_fit.beta.as_slice(),
            alpha,
            Variant::Baseline,
        )?;
        let spec = ExemplarSpec::new(
            ExemplarPoint::Row { row: exemplar_row },
            alpha,
            Some(REGRESSION_MASK.to_vec()),
        );
        let stereotyped = apply_exemplar(&base, &spec, recompute)?;
        regression_metrics(
            &mut sink,
            &stereotyped,
            base_fit.beta.as_slice(),
            alpha,
            Variant::Stereotyped,
        )?;

        if postprocess {
            let mut restored = stereotyped.clone();
            restored.set_label(base.label().map(<[f64]>::to_vec))?;
            regression_metrics_on(
                &mut sink,
                &restored,
                &stereotyped,
                base_fit.beta.as_slice(),
                alpha,
                Variant::LabelPostprocessed,
            )?;
        } else {
            // fixed-label single-coordinate updates, rank-2 path against a refit
            for s in REGRESSION_MASK {
                let p = PerturbationSpec {
                    coordinate: s,
                    alpha,
                    exemplar_value: base.value(exemplar_row, s),
                };
                let (updated, parts) = woodbury_beta_update(&base_fit, &base, &p)?;
                let refit = ols_fit_table(&perturb_single_coordinate(&base, &p)?)?;
                let diff = updated
                    .beta
                    .iter()
                    .zip(&refit.beta)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let p2 = parts.p2.iter().map(|v| v * v).sum::<f64>().sqrt();
                let name = &base.column_names()[s];
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Stereotyped,
                    &format!("woodbury_max_abs_diff_{name}"),
                    diff,
                );
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Stereotyped,
                    &format!("p2_norm_{name}"),
                    p2,
                );
            }
        }

        let status = match mitigate_exemplar_with_labels(
            &stereotyped,
            &wae,
            Some(&REGRESSION_MASK),
            recompute,
        ) {
            Ok(est) => {
                regression_metrics(
                    &mut sink,
                    &est.reconstructed,
                    base_fit.beta.as_slice(),
                    alpha,
                    Variant::Mitigated,
                )?;
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "alpha_hat",
                    est.alpha_hat,
                );
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "exemplar_row",
                    est.exemplar_row as f64,
                );
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "no_candidate",
                    0.0,
                );
                json!({ "alpha": alpha, "status": "ok", "alpha_hat": est.alpha_hat, "exemplar_row": est.exemplar_row })
            }
            Err(e) if is_refusal(&e) => {
                refused += 1;
                sink.push(
                    "subspace",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "no_candidate",
                    1.0,
                );
                json!({ "alpha": alpha, "status": "no_candidate" })
            }
            Err(e) => return Err(e),
        };
        cells.push(status);
    }
    Ok(RegressionRun {
        base,
        exemplar_row,
        sink,
        refused,
        cells,
    })
}

/// Pull x2, x3, x4 of the minority toward the minority row with the lowest
/// target, recompute the target, and compare group mean predictions.
pub fn run_regression_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::Regression)?;
    regression_result(cfg, "regression", false)
}

/// Compares three responses to the same perturbation: doing nothing,
/// restoring only the labels, and reconstructing the features.
pub fn run_postprocess_demo(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::Postprocess)?;
    regression_result(cfg, "postprocess", true)
}

fn regression_result(
    cfg: &ExperimentConfig,
    name: &str,
    postprocess: bool,
) -> Result<ExperimentResult> {
    let run = regression_sweep(cfg, name, postprocess)?;
    let summary = json!({
        "experiment": name,
        "epsilon": cfg.epsilon(),
        "n": run.base.n_rows(),
        "exemplar_row": run.exemplar_row,
        "exemplar": run.base.row(run.exemplar_row),
        "sweep": cfg.sweep(),
        "cells": run.cells,
    });
    let notes = vec![
        ("epsilon".into(), cfg.epsilon().to_string()),
        (
            "exemplar_row".into(),
            format!("{} (lowest-target minority row)", run.exemplar_row),
        ),
    ];
    finish(run.sink, notes, summary, run.refused)
}

// ---------------------------------------------------------- clustering

/// Minority row farthest from the minority centroid; ties go to the lowest
/// index.
pub fn farthest_minority_row(table: &DataTable) -> Result<usize> {
    let minority = table.indices_of(Group::Minority);
    if minority.is_empty() {
        return Err(StereoError::structural("table has no minority rows"));
    }
    let d = table.n_cols();
    let mut centre = vec![0.0; d];
    for &i in &minority {
        for (c, x) in centre.iter_mut().zip(table.row(i)) {
            *c += x;
        }
    }
    centre.iter_mut().for_each(|c| *c /= minority.len() as f64);
    let dist = |i: usize| -> f64 {
        table
            .row(i)
            .iter()
            .zip(&centre)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    Ok(minority
        .into_iter()
        .max_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(b.cmp(&a)))
        .expect("non-empty"))
}

fn clustering_metrics(
    sink: &mut RowSink,
    table: &DataTable,
    cfg: &ExperimentConfig,
    alpha: f64,
    variant: Variant,
) -> Result<()> {
    let truth: Vec<usize> = table.require_label()?.iter().map(|&v| v as usize).collect();
    let plain = kmeans(table, cfg.k(), cfg.restarts(), cfg.seed)?;
    let fair = fairlet_kmeans(table, cfg.k(), cfg.restarts(), cfg.seed)?;
    let m = "exemplar";
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "kmeans_ari",
        adjusted_rand_index(&plain.assignments, &truth)?,
    );
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "kmeans_balance",
        balance(&plain.assignments, table.groups())?,
    );
    sink.push(m, "alpha", alpha, variant, "kmeans_cost", plain.cost);
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "fair_ari",
        adjusted_rand_index(&fair.assignments, &truth)?,
    );
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "fair_balance",
        balance(&fair.assignments, table.groups())?,
    );
    sink.push(m, "alpha", alpha, variant, "fair_cost", fair.cost);
    sink.push(
        m,
        "alpha",
        alpha,
        variant,
        "cost_ratio",
        fair.cost / plain.cost,
    );
    Ok(())
}

/// Pull the minority toward its most outlying member and compare k-means
/// with fairlet clustering.
pub fn run_clustering_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::Clustering)?;
    let wae = WaeParams {
        epsilon: cfg.epsilon(),
    };
    let base = generate_clustering_dataset(cfg.n(), cfg.std(), cfg.seed)?;
    let exemplar_row = farthest_minority_row(&base)?;
    let mut sink = RowSink::new("clustering", cfg.seed.0);
    let mut refused = 0;
    let mut cells = Vec::new();
    for alpha in cfg.sweep() {
        clustering_metrics(&mut sink, &base, cfg, alpha, Variant::Baseline)?;
        let spec = ExemplarSpec::new(ExemplarPoint::Row { row: exemplar_row }, alpha, None);
        let stereotyped = apply_exemplar(&base, &spec, LabelMode::Fixed)?;
        clustering_metrics(&mut sink, &stereotyped, cfg, alpha, Variant::Stereotyped)?;
        match mitigate_exemplar(&stereotyped, &wae, None) {
            Ok(est) => {
                clustering_metrics(
                    &mut sink,
                    &est.reconstructed,
                    cfg,
                    alpha,
                    Variant::Mitigated,
                )?;
                sink.push(
                    "exemplar",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "alpha_hat",
                    est.alpha_hat,
                );
                sink.push(
                    "exemplar",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "exemplar_row",
                    est.exemplar_row as f64,
                );
                sink.push(
                    "exemplar",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "no_candidate",
                    0.0,
                );
                cells.push(json!({ "alpha": alpha, "status": "ok", "alpha_hat": est.alpha_hat, "exemplar_row": est.exemplar_row }));
            }
            Err(e) if is_refusal(&e) => {
                refused += 1;
                sink.push(
                    "exemplar",
                    "alpha",
                    alpha,
                    Variant::Mitigated,
                    "no_candidate",
                    1.0,
                );
                cells.push(json!({ "alpha": alpha, "status": "no_candidate" }));
            }
            Err(e) => return Err(e),
        }
    }
    let summary = json!({
        "experiment": "clustering",
        "epsilon": wae.epsilon,
        "n": cfg.n(),
        "k": cfg.k(),
        "restarts": cfg.restarts(),
        "exemplar_row": exemplar_row,
        "exemplar": base.row(exemplar_row),
        "sweep": cfg.sweep(),
        "cells": cells,
    });
    let notes = vec![
        ("epsilon".into(), wae.epsilon.to_string()),
        (
            "exemplar_row".into(),
            format!("{exemplar_row} (minority row farthest from the minority centroid)"),
        ),
    ];
    finish(sink, notes, summary, refused)
}
