//! Modified bootstrap for uncertainty of effect estimates.
//!
//! Each replicate resamples outcome units with replacement, retains exactly
//! the intervention units serving as key or upwind for at least one
//! resampled unit, refits the propensity model on that subset (with eta
//! summaries frozen at their full-data values), rebuilds and re-truncates
//! the joint propensities, refits the outcome model, and recomputes every
//! configured estimate. Confidence intervals use the percentile method.
//!
//! Replicates are independent streams derived from the root seed, merged by
//! replicate index, so parallel and serial execution produce identical
//! tables.

use rand::Rng;
use rayon::prelude::*;

use crate::effects::{Estimand, Method};
use crate::error::{Error, Result};
use crate::regress::quantile;
use crate::rng::stream_rng;
use crate::study::{compute_estimates, fit_analysis, AnalysisConfig, Study};

/// Bootstrap tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    /// Confidence level of the percentile intervals.
    pub level: f64,
    /// Clip replicate propensities with the full-data truncation bounds
    /// instead of recomputing bounds from each resample.
    pub reuse_full_data_bounds: bool,
    /// Redraw attempts for degenerate replicates before giving up.
    pub max_redraws: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions { level: 0.95, reuse_full_data_bounds: false, max_redraws: 10 }
    }
}

/// One replicate estimate.
#[derive(Debug, Clone)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub estimand: Estimand,
    pub method: Method,
    pub subgroup: String,
    pub estimate: f64,
}

/// Percentile interval for one estimate key.
#[derive(Debug, Clone)]
pub struct CiRow {
    pub estimand: Estimand,
    pub method: Method,
    pub subgroup: String,
    pub lower: f64,
    pub upper: f64,
}

/// Output of a bootstrap run.
#[derive(Debug, Clone)]
pub struct BootstrapRun {
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    /// One row per replicate x estimand x method x subgroup, ordered by
    /// replicate index then configuration order.
    pub rows: Vec<ReplicateRow>,
    /// Total degenerate replicates that were redrawn.
    pub redraws: usize,
    pub cis: Vec<CiRow>,
}

impl BootstrapRun {
    pub fn ci(&self, estimand: Estimand, method: Method, subgroup: &str) -> Option<(f64, f64)> {
        self.cis
            .iter()
            .find(|c| c.estimand == estimand && c.method == method && c.subgroup == subgroup)
            .map(|c| (c.lower, c.upper))
    }
}

/// Nearest-rank percentile interval at the given level.
pub fn percentile_ci(replicates: &[f64], level: f64) -> Result<(f64, f64)> {
    if replicates.is_empty() {
        return Err(Error::Parameter("percentile interval of empty input".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("confidence level {} outside (0, 1)", level)));
    }
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(replicates, alpha)?, quantile(replicates, 1.0 - alpha)?))
}

/// Errors that mark a replicate as degenerate (redrawn) rather than fatal:
/// a single treatment class among retained plants, an exposure cell or
/// subgroup emptied by the resample, or a design made deficient by it.
fn is_degenerate_replicate(err: &Error) -> bool {
    matches!(
        err,
        Error::DegenerateResponse(_)
            | Error::Stabilization(_)
            | Error::Subgroup(_)
            | Error::RankDeficient(_)
            | Error::Collinearity(_)
            | Error::DegenerateCovariate(_)
    )
}

fn draw_outcome_rows<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Intervention units serving as key or upwind for at least one of `rows`.
fn retained_plants(study: &Study, rows: &[usize]) -> Result<Vec<usize>> {
    let key_of = study.network.key_of()?;
    let upwind_of = study.network.upwind_of()?;
    let mut flag = vec![false; study.n_intervention()];
    for &i in rows {
        flag[key_of[i]] = true;
        for &j in &upwind_of[i] {
            flag[j] = true;
        }
    }
    Ok(flag
        .iter()
        .enumerate()
        .filter_map(|(j, &f)| f.then_some(j))
        .collect())
}

fn run_replicate(
    study: &Study,
    config: &AnalysisConfig,
    options: &BootstrapOptions,
    bounds: Option<&crate::propensity::TruncationBounds>,
    seed: u64,
    replicate: usize,
) -> Result<(Vec<ReplicateRow>, usize)> {
    let mut rng = stream_rng(seed, replicate as u64 + 1);
    let n = study.n_outcome();
    let mut redraws = 0usize;

    for _attempt in 0..=options.max_redraws {
        let rows = draw_outcome_rows(&mut rng, n);
        let plants = retained_plants(study, &rows)?;
        match compute_estimates(study, config, Some(&rows), Some(&plants), bounds) {
            Ok(estimates) => {
                let rows = estimates
                    .into_iter()
                    .map(|e| ReplicateRow {
                        replicate,
                        estimand: e.estimand,
                        method: e.method,
                        subgroup: e.subgroup.unwrap_or_default(),
                        estimate: e.estimate,
                    })
                    .collect();
                return Ok((rows, redraws));
            }
            Err(err) if is_degenerate_replicate(&err) => {
                redraws += 1;
                continue;
            }
            Err(err) => return Err(err),
        }
    }
    Err(Error::Bootstrap(format!(
        "replicate {} degenerate after {} redraws (seed {})",
        replicate, options.max_redraws, seed
    )))
}

/// Run the five-step bootstrap for every configured estimate.
pub fn bootstrap_effects(
    study: &Study,
    config: &AnalysisConfig,
    replications: usize,
    seed: u64,
    options: &BootstrapOptions,
) -> Result<BootstrapRun> {
    if replications < 2 {
        return Err(Error::Parameter(format!(
            "bootstrap needs at least 2 replications, got {}",
            replications
        )));
    }
    // Full-data bounds are only needed when replicates reuse them.
    let full_bounds = if options.reuse_full_data_bounds {
        Some(fit_analysis(study, config, None, None, None)?.bounds)
    } else {
        None
    };

    let results: Result<Vec<(Vec<ReplicateRow>, usize)>> = (0..replications)
        .into_par_iter()
        .map(|r| run_replicate(study, config, options, full_bounds.as_ref(), seed, r))
        .collect();
    let results = results?;

    let mut rows = Vec::new();
    let mut redraws = 0;
    for (mut replicate_rows, replicate_redraws) in results {
        rows.append(&mut replicate_rows);
        redraws += replicate_redraws;
    }

    // Percentile intervals per estimate key, in configuration order.
    let mut cis = Vec::new();
    for &estimand in &config.estimands {
        for &method in &config.methods {
            for subgroup in &config.subgroups {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        r.estimand == estimand && r.method == method && r.subgroup == subgroup.name
                    })
                    .map(|r| r.estimate)
                    .collect();
                let (lower, upper) = percentile_ci(&values, options.level)?;
                cis.push(CiRow { estimand, method, subgroup: subgroup.name.clone(), lower, upper });
            }
        }
    }

    Ok(BootstrapRun { replications, seed, level: options.level, rows, redraws, cis })
}

/// Percentile intervals for discovery coefficients: the same five-step
/// bootstrap, recomputing per-unit estimates, median binarization, and the
/// heterogeneity regression on every resample.
#[derive(Debug, Clone)]
pub struct DiscoveryBootstrap {
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    /// Per covariate: (name, percentile lower, percentile upper).
    pub cis: Vec<(String, f64, f64)>,
    pub redraws: usize,
}

fn discovery_replicate(
    study: &Study,
    config: &AnalysisConfig,
    method: Method,
    estimand: Estimand,
    options: &BootstrapOptions,
    bounds: Option<&crate::propensity::TruncationBounds>,
    seed: u64,
    replicate: usize,
    covariate_names: &[String],
) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream_rng(seed, replicate as u64 + 1);
    let n = study.n_outcome();
    let mut redraws = 0usize;
    let covariates = study.outcome_covariate_frame()?;

    for _attempt in 0..=options.max_redraws {
        let rows = draw_outcome_rows(&mut rng, n);
        let plants = retained_plants(study, &rows)?;
        let attempt = (|| -> Result<Vec<f64>> {
            let fitted = fit_analysis(study, config, Some(&rows), Some(&plants), bounds)?;
            let iates = crate::effects::iate(&fitted.inputs(), method, estimand)?;
            let binarized = crate::discovery::binarize_at_median(&covariates.select_rows(&rows))?;
            let report = crate::discovery::discover(&iates, &binarized, estimand, method)?;
            Ok(report.rows.iter().map(|r| r.coefficient).collect())
        })();
        match attempt {
            Ok(coefficients) => {
                debug_assert_eq!(coefficients.len(), covariate_names.len());
                return Ok((coefficients, redraws));
            }
            Err(err) if is_degenerate_replicate(&err) => {
                redraws += 1;
                continue;
            }
            Err(err) => return Err(err),
        }
    }
    Err(Error::Bootstrap(format!(
        "discovery replicate {} degenerate after {} redraws (seed {})",
        replicate, options.max_redraws, seed
    )))
}

/// Bootstrap the discovery regression coefficients.
pub fn bootstrap_discovery(
    study: &Study,
    config: &AnalysisConfig,
    method: Method,
    estimand: Estimand,
    replications: usize,
    seed: u64,
    options: &BootstrapOptions,
) -> Result<DiscoveryBootstrap> {
    if replications < 2 {
        return Err(Error::Parameter(format!(
            "bootstrap needs at least 2 replications, got {}",
            replications
        )));
    }
    let covariate_names: Vec<String> = study.outcome_covariate_frame()?.names().to_vec();
    let full_bounds = if options.reuse_full_data_bounds {
        Some(fit_analysis(study, config, None, None, None)?.bounds)
    } else {
        None
    };

    let results: Result<Vec<(Vec<f64>, usize)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            discovery_replicate(
                study,
                config,
                method,
                estimand,
                options,
                full_bounds.as_ref(),
                seed,
                r,
                &covariate_names,
            )
        })
        .collect();
    let results = results?;

    let redraws = results.iter().map(|(_, r)| r).sum();
    let mut cis = Vec::with_capacity(covariate_names.len());
    for (k, name) in covariate_names.iter().enumerate() {
        let values: Vec<f64> = results.iter().map(|(coefs, _)| coefs[k]).collect();
        let (lower, upper) = percentile_ci(&values, options.level)?;
        cis.push((name.clone(), lower, upper));
    }

    Ok(DiscoveryBootstrap { replications, seed, level: options.level, cis, redraws })
}
