//! Propensity score matching for observational studies.
//!
//! The workflow mirrors the usual analysis steps:
//!
//! 1. load unit-level data with a binary treatment ([`dataset`]),
//! 2. estimate propensity scores by logistic regression ([`propensity`]),
//! 3. match treated to control units greedily on the score, with optional
//!    caliper, ratio, replacement and common-support rules ([`matcher`]),
//! 4. check covariate balance before and after matching ([`balance`],
//!    [`diagnostics`]),
//! 5. export the matched data with scores and weights for outcome analysis.
//!
//! [`pipeline::run`] chains all of it; [`simgen`] produces confounded
//! synthetic data for trying things out.

pub mod balance;
pub mod config;
pub mod dataset;
pub mod diagnostics;
pub mod matcher;
pub mod pipeline;
pub mod propensity;
pub mod rng;
pub mod simgen;

pub use balance::{
    condensed_table, l1_measure, omnibus_d2, sample_size_table, smd_table, L1Result, OmnibusResult,
    Phase, SampleSizes, TermBalance,
};
pub use dataset::{export, load_csv, ColumnRoles, Dataset, DatasetError, ExportMode};
pub use matcher::{
    common_support, match_units, CaliperMode, Discard, Disposition, MatchError, MatchResult,
    MatchSpec,
};
pub use pipeline::{analyze, run, Analysis, PipelineError, RunConfig};
pub use propensity::{fit_logistic, predict, PropensityError, PropensityModel};
pub use simgen::{simulate, SimSpec};
