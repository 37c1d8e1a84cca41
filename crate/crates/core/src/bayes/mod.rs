//! Hierarchical Bayesian feature–preference correlation.

pub mod diagnostics;
mod fit;
pub mod model;
pub mod nuts;
mod report;

pub use diagnostics::{bulk_ess, diagnostics, split_rhat, Diagnostics, ScalarDiagnostics};
pub use fit::{
    build_data, fit_data, fit_feature_correlation, logit_shift_to_probability, synthetic_data, BayesConfig,
    CorrelationResult, ProbabilityShift, Summary, SyntheticSpec, TopicCorrelation,
};
pub use model::{grad_log_posterior, log_posterior, BayesData, BayesParams, Layout, Posterior, Prior};
pub use nuts::{nuts_sample, Chain, FnDensity, LogDensity, NutsConfig};
pub use report::{write_correlations_csv, write_forest_svg, POOLED_LABEL};
