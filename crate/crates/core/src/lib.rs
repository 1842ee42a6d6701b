//! Nonparametric rank tests for multivariate two-sample matched designs
//! with incomplete observations.
//!
//! The pipeline is [`model::MaskedSample`] → [`model::derive_pattern_index`]
//! → [`ranking::build_rank_table`] → [`effects::estimate_effects`] →
//! covariance ([`covariance::covariance_simple`] or
//! [`covariance::covariance_general`]) → [`inference::wald_test`] /
//! [`inference::anova_test`]. [`inference::run_all_methods`] bundles the
//! steps for the all-data, complete-case and incomplete-case analyses.

pub mod covariance;
pub mod effects;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod ranking;
pub mod simulation;
pub mod special;

pub use covariance::{
    covariance_general, covariance_oracle_unobservable, covariance_simple, CovarianceEstimate,
};
pub use effects::{
    estimate_effects, estimate_effects_integral, restrict_method, EffectEstimate, Method,
};
pub use error::{Error, Result};
pub use inference::{anova_test, run_all_methods, wald_test, PatternChoice, TestKind, TestReport};
pub use io::{
    analyze_dataset, analyze_file, parse_dataset, AnalyzeOptions, Dataset, ParseOptions,
    ReportDocument,
};
pub use model::{derive_pattern_index, Group, Hypothesis, MaskedSample, PatternIndex};
pub use ranking::{build_rank_table, placements, RankTable};
pub use special::chisq_upper_tail;
