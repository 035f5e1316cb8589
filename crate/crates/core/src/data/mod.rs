//! Tabular data: the [`DataTable`] container, group statistics, synthetic
//! generators and CSV encoding.

mod generate;
mod io;
mod table;

pub use generate::{
    generate_clustering_dataset, generate_nb_dataset, generate_regression_dataset,
    regression_target, split_indices, split_train_test, NbDatasetConfig, SelectionRule, NB_COLUMNS,
    NB_MATH_COLUMN, REGRESSION_COLUMNS,
};
pub use io::{read_csv, read_csv_file, write_csv, write_csv_file, GROUP_COLUMN};
pub use table::{group_stats, DataTable, Group, GroupStats, DEFAULT_LABEL_NAME};
