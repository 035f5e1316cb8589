//! Downstream learners: Naive Bayes, least squares with a rank-2
//! perturbation update, k-means and a fairlet fair-clustering baseline.

mod fairlet;
mod kmeans;
mod naive_bayes;
mod ols;

pub use fairlet::{
    fairlet_decomposition, fairlet_kmeans, greedy_fairlets, MAX_IMBALANCE, MAX_SWAP_PASSES,
};
pub use kmeans::{
    assignment_cost, kmeans, kmeans_points, KMeansResult, DEFAULT_RESTARTS, MAX_ITERATIONS,
    SHIFT_TOLERANCE,
};
pub use naive_bayes::{FeatureTable, NaiveBayesModel};
pub use ols::{
    ols_fit, ols_fit_table, perturb_single_coordinate, woodbury_beta_update, LinearFit,
    PerturbationSpec, WoodburyUpdate, MAX_CONDITION, WARN_CONDITION,
};
