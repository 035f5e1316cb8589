use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use stereolab::data::{
    generate_clustering_dataset, generate_nb_dataset, generate_regression_dataset, read_csv_file,
    regression_target, write_csv_file, DataTable, Group, NbDatasetConfig, NB_COLUMNS,
    NB_MATH_COLUMN,
};
use stereolab::harness::{
    run_experiment, ExperimentConfig, ExperimentKind, LabelPolicy, MitigationConfig, ModelKind,
    REGRESSION_MASK,
};
use stereolab::mitigation::{
    mitigate_exemplar_with_labels, mitigate_representativeness_table, MitigationReport, WaeParams,
};
use stereolab::models::{fairlet_kmeans, kmeans, ols_fit_table, NaiveBayesModel};
use stereolab::transforms::{LabelMode, StereotypeSpec};
use stereolab::{RandomSeed, StereoError};

#[derive(Parser)]
#[command(
    name = "stereolab",
    version,
    about = "Stereotype simulation, harm measurement and mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `out_dir`, else `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset to `dataset.csv`.
    Generate(Common),
    /// Apply the config's `stereotype` block, writing `perturbed.csv`.
    Perturb(Common),
    /// Fit the configured model, writing `model.json`.
    Fit(Common),
    /// Reconstruct pre-stereotype data, writing `mitigated.csv` and `estimate.json`.
    Mitigate(Common),
    /// Run an experiment sweep, writing `<name>.csv` and `<name>_summary.json`.
    Experiment {
        /// nb, regression, clustering or postprocess.
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    Refused(String),
    Other(String),
}

impl From<StereoError> for Failure {
    fn from(e: StereoError) -> Self {
        match e {
            StereoError::Parameter(_) | StereoError::Json(_) => Failure::Config(e.to_string()),
            StereoError::Saturation { .. }
            | StereoError::NoCandidate { .. }
            | StereoError::Collapse { .. } => Failure::Refused(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(
    common: &Common,
    default_kind: Option<ExperimentKind>,
) -> std::result::Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = match (&common.config, default_kind) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?
        }
        (None, Some(kind)) => ExperimentConfig::new(kind),
        (None, None) => {
            return Err(Failure::Config(
                "--config is required for this command".into(),
            ))
        }
    };
    if let Some(s) = common.seed {
        cfg.seed = RandomSeed(s);
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn input_table(cfg: &ExperimentConfig) -> stereolab::Result<DataTable> {
    if let Some(path) = &cfg.input {
        return read_csv_file(path);
    }
    match cfg.experiment {
        ExperimentKind::Nb => {
            let base = cfg.p_math_given_majority();
            let data_cfg = NbDatasetConfig {
                n: cfg.n(),
                p_sensitive: cfg.p_sensitive(),
                p_math_given_minority: cfg.lambda_targets()[0] * base,
                p_math_given_majority: base,
                selection: cfg.selection(),
            };
            generate_nb_dataset(&data_cfg, cfg.seed)
        }
        ExperimentKind::Regression | ExperimentKind::Postprocess => {
            generate_regression_dataset(cfg.n(), cfg.noise_halfwidth(), cfg.seed)
        }
        ExperimentKind::Clustering => generate_clustering_dataset(cfg.n(), cfg.std(), cfg.seed),
    }
}

fn label_mode(cfg: &ExperimentConfig, table: &DataTable) -> stereolab::Result<LabelMode> {
    match cfg.labels() {
        LabelPolicy::Fixed => Ok(LabelMode::Fixed),
        LabelPolicy::Recomputed => {
            if table.n_cols() != 4 || table.label().is_none() {
                return Err(StereoError::Parameter(
                    "recomputed labels need the regression layout (sensitive, x2, x3, x4, y)"
                        .into(),
                ));
            }
            Ok(LabelMode::Recompute(regression_target))
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(StereoError::from)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn generate(common: &Common) -> Outcome {
    let (cfg, out) = load_config(common, None)?;
    write_csv_file(&input_table(&cfg)?, &out.join("dataset.csv"))?;
    Ok(())
}

fn perturb(common: &Common) -> Outcome {
    let (cfg, out) = load_config(common, None)?;
    let spec = cfg
        .stereotype
        .clone()
        .ok_or_else(|| Failure::Config("config has no 'stereotype' block".into()))?;
    let table = input_table(&cfg)?;
    let perturbed = spec.apply(&table, label_mode(&cfg, &table)?, cfg.seed)?;
    write_csv_file(&perturbed, &out.join("perturbed.csv"))?;
    Ok(())
}

fn fit(common: &Common) -> Outcome {
    let (cfg, out) = load_config(common, None)?;
    let table = input_table(&cfg)?;
    let kind = cfg.model.unwrap_or(match cfg.experiment {
        ExperimentKind::Nb => ModelKind::Nb,
        ExperimentKind::Regression | ExperimentKind::Postprocess => ModelKind::Ols,
        ExperimentKind::Clustering => ModelKind::Kmeans,
    });
    let path = out.join("model.json");
    match kind {
        ModelKind::Nb => write_json(&path, &NaiveBayesModel::fit(&table, cfg.smoothing())?),
        ModelKind::Ols => write_json(&path, &ols_fit_table(&table)?),
        ModelKind::Kmeans => write_json(&path, &kmeans(&table, cfg.k(), cfg.restarts(), cfg.seed)?),
        ModelKind::Fairlet => write_json(
            &path,
            &fairlet_kmeans(&table, cfg.k(), cfg.restarts(), cfg.seed)?,
        ),
    }
}

fn mitigation_config(cfg: &ExperimentConfig) -> MitigationConfig {
    if let Some(m) = &cfg.mitigation {
        return m.clone();
    }
    match &cfg.stereotype {
        Some(StereotypeSpec::Representativeness(r)) => MitigationConfig::Representativeness {
            type_column: r.type_column.clone(),
        },
        Some(StereotypeSpec::Exemplar { mask, .. }) => {
            MitigationConfig::Exemplar { mask: mask.clone() }
        }
        Some(StereotypeSpec::Subspace { mask, .. }) => MitigationConfig::Exemplar {
            mask: Some(mask.clone()),
        },
        None => match cfg.experiment {
            ExperimentKind::Nb => MitigationConfig::Representativeness {
                type_column: NB_COLUMNS[NB_MATH_COLUMN].into(),
            },
            ExperimentKind::Regression | ExperimentKind::Postprocess => {
                MitigationConfig::Exemplar {
                    mask: Some(REGRESSION_MASK.to_vec()),
                }
            }
            ExperimentKind::Clustering => MitigationConfig::Exemplar { mask: None },
        },
    }
}

fn mitigate(common: &Common) -> Outcome {
    let (cfg, out) = load_config(common, None)?;
    let table = input_table(&cfg)?;
    let wae = WaeParams {
        epsilon: cfg.epsilon(),
    };
    let estimate_path = out.join("estimate.json");
    let (mechanism, result) = match mitigation_config(&cfg) {
        MitigationConfig::Exemplar { mask } => {
            let mechanism = if mask.is_some() {
                "subspace"
            } else {
                "exemplar"
            };
            let labels = label_mode(&cfg, &table)?;
            let result =
                mitigate_exemplar_with_labels(&table, &wae, mask.as_deref(), labels).map(|est| {
                    (
                        MitigationReport::from_exemplar(mechanism, &est),
                        est.reconstructed,
                    )
                });
            (mechanism, result)
        }
        MitigationConfig::Representativeness { type_column } => {
            let col = table
                .column_index(&type_column)
                .ok_or_else(|| Failure::Config(format!("no column named '{type_column}'")))?;
            let result =
                mitigate_representativeness_table(&table, col, Group::Minority, &wae, cfg.seed)
                    .map(|(est, t)| (MitigationReport::from_rho(&est), t));
            ("representativeness", result)
        }
    };
    match result {
        Ok((report, reconstructed)) => {
            write_csv_file(&reconstructed, &out.join("mitigated.csv"))?;
            write_json(&estimate_path, &report)
        }
        Err(e) => {
            if let Some(report) = MitigationReport::from_error(mechanism, wae.epsilon, &e) {
                write_json(&estimate_path, &report)?;
            }
            Err(e.into())
        }
    }
}

fn experiment(name: &str, common: &Common) -> Outcome {
    let kind = ExperimentKind::parse(name).map_err(|e| Failure::Config(e.to_string()))?;
    let (cfg, out) = load_config(common, Some(kind))?;
    if cfg.experiment != kind {
        return Err(Failure::Config(format!(
            "config describes experiment '{}' but '{name}' was requested",
            cfg.experiment.name()
        )));
    }
    let result = run_experiment(&cfg)?;
    fs::write(out.join(format!("{name}.csv")), result.to_csv_string(&cfg)?)?;
    write_json(
        &out.join(format!("{name}_summary.json")),
        &result.summary_json(&cfg),
    )?;
    if result.refused_cells > 0 {
        return Err(Failure::Refused(format!(
            "{} sweep cell(s) could not be mitigated; partial results written",
            result.refused_cells
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Perturb(c) => perturb(c),
        Command::Fit(c) => fit(c),
        Command::Mitigate(c) => mitigate(c),
        Command::Experiment { name, common } => experiment(name, common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            error!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Refused(msg)) => {
            error!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            error!("{msg}");
            ExitCode::from(1)
        }
    }
}
