//! Heterogeneous causal effect estimation under bipartite network
//! interference.
//!
//! Treatments are applied to one set of units (e.g. emission sources) while
//! outcomes are measured on a disjoint set (e.g. communities), linked by a
//! weighted bipartite graph. This crate provides:
//!
//! - the network data model with key-associated/upwind exposure derivation
//!   ([`bipartite`]);
//! - joint propensity scores with quantile truncation ([`propensity`]);
//! - G-computation, AIPW, and stabilized AIPW estimators of direct and
//!   spillover effects, population, subgroup, and per-unit ([`effects`]);
//! - data-driven subgroup discovery over de-meaned per-unit effects
//!   ([`discovery`]);
//! - a modified outcome-unit bootstrap with percentile intervals
//!   ([`bootstrap`]);
//! - an empirical Monte Carlo harness with planted effect heterogeneity and
//!   misspecification scenarios ([`simgen`]);
//! - self-contained regression kernels (logistic IRLS, OLS, Huber)
//!   ([`regress`]) and CSV interfaces ([`io`]).

pub mod bipartite;
pub mod bootstrap;
pub mod discovery;
pub mod effects;
pub mod error;
pub mod formula;
pub mod io;
pub mod linalg;
pub mod propensity;
pub mod regress;
pub mod rng;
pub mod simgen;
pub mod study;
pub mod table;

pub use bipartite::{
    cell_counts, derive_exposure_structure, filter_low_influence, load_network, map_treatments,
    subset_outcome_units, summarize_outcome_covariates, BipartiteNetwork, CellCounts, EtaRole,
    EtaSummary, ExposureAssignment, ExposureMapping, SecondRanked,
};
pub use bootstrap::{
    bootstrap_discovery, bootstrap_effects, percentile_ci, BootstrapOptions, BootstrapRun,
    DiscoveryBootstrap,
};
pub use discovery::{binarize_at_median, demean, discover, BinarizedCovariates, DiscoveryReport};
pub use effects::{
    aipw_mu, effect, fit_outcome_model, gcomp_mu, iate, percent_absolute_bias, saipw_mu,
    EffectEstimate, Estimand, EstimatorInputs, Method, OutcomePredictions, Predicate, Subgroup,
};
pub use error::{Error, Result};
pub use formula::Formula;
pub use propensity::{
    build_joint_propensity, cell_index, fit_intervention_propensity, truncate_scores,
    PropensityBundle, TruncationConfig,
};
pub use regress::{fit_huber, fit_logistic, fit_ols, predict_logistic, quantile, FittedLinearModel};
pub use simgen::{
    generate_outcomes, generate_synthetic_network, generate_treatments, plant_heterogeneity,
    run_scenario, summarize_ab, Misspec, PlantedEffects, ScenarioOutput, SimScenario,
    SyntheticConfig,
};
pub use study::{align_table, compute_estimates, fit_analysis, AnalysisConfig, FittedAnalysis, Study};
pub use table::{Frame, UnitTable};
