//! `bni estimate`: effect estimation over a loaded dataset, with optional
//! bootstrap confidence intervals.

use std::path::PathBuf;

use clap::Args;

use bni_core::bipartite::filter_low_influence;
use bni_core::bootstrap::{bootstrap_effects, BootstrapOptions};
use bni_core::effects::{EffectEstimate, Estimand, Method, Predicate, Subgroup};
use bni_core::error::{Error, Result};
use bni_core::formula::Formula;
use bni_core::io::{
    read_network_csv, read_unit_table_csv, write_cis_csv, write_estimates_csv, write_psi_csv,
    write_replicates_csv, TableKind,
};
use bni_core::propensity::TruncationConfig;
use bni_core::study::{fit_analysis, AnalysisConfig, Study};
use bni_core::table::Frame;

use crate::config::{
    ensure_out_dir, parse_f64, parse_quantile_pair, parse_u64, parse_usize, write_output, ConfigMap,
    ResolvedConfig,
};

#[derive(Args)]
pub struct EstimateArgs {
    /// Network CSV (`intervention_id,outcome_id,weight`).
    #[arg(long)]
    pub network: PathBuf,
    /// Intervention-unit table CSV (`id,<covariate...>,treatment`).
    #[arg(long)]
    pub plants: PathBuf,
    /// Outcome-unit table CSV (`id,<covariate...>,outcome`).
    #[arg(long)]
    pub zips: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Optional `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; required when bootstrapping.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap replication count (omit to skip the bootstrap).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Component truncation quantiles `lower,upper`.
    #[arg(long)]
    pub truncate: Option<String>,
    /// Joint-cell truncation quantiles `lower,upper`.
    #[arg(long)]
    pub truncate_joint: Option<String>,
    /// Methods to apply (comma list of G, AIPW, SAIPW).
    #[arg(long)]
    pub methods: Option<String>,
    /// Estimands (comma list of tau0, tau1, delta0, delta1).
    #[arg(long)]
    pub estimands: Option<String>,
    /// Propensity model formula.
    #[arg(long)]
    pub propensity_formula: Option<String>,
    /// Outcome model formula (must include Z and G).
    #[arg(long)]
    pub outcome_formula: Option<String>,
    /// Subgroup predicate `name: col>val & col2<=val2` (repeatable).
    #[arg(long = "subgroup")]
    pub subgroups: Vec<String>,
    /// Drop outcome units with key weights below this quantile.
    #[arg(long)]
    pub filter_quantile: Option<f64>,
    /// Also emit the joint propensity table.
    #[arg(long)]
    pub emit_psi: bool,
    /// Reuse full-data truncation bounds inside bootstrap replicates.
    #[arg(long)]
    pub reuse_truncation_bounds: bool,
    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    pub dry_run: bool,
}

pub fn parse_methods(text: &str) -> Result<Vec<Method>> {
    text.split(',').map(Method::parse).collect()
}

pub fn parse_estimands(text: &str) -> Result<Vec<Estimand>> {
    text.split(',')
        .map(|t| match t.trim().to_ascii_lowercase().as_str() {
            "tau0" | "tau(0)" | "direct0" => Ok(Estimand::Direct { held_g: 0 }),
            "tau1" | "tau(1)" | "direct1" => Ok(Estimand::Direct { held_g: 1 }),
            "delta0" | "delta(0)" | "spillover0" => Ok(Estimand::Spillover { held_z: 0 }),
            "delta1" | "delta(1)" | "spillover1" => Ok(Estimand::Spillover { held_z: 1 }),
            other => Err(Error::Config(format!("unknown estimand '{}'", other))),
        })
        .collect()
}

/// Linear main-effects formula over every column of a frame.
fn default_formula(frame: &Frame, with_exposures: bool) -> Result<Formula> {
    let mut terms: Vec<String> = frame.names().to_vec();
    if with_exposures {
        terms.push("Z".into());
        terms.push("G".into());
    }
    if terms.is_empty() {
        return Err(Error::Config("no covariates available for a default formula".into()));
    }
    Formula::parse(&terms.join(" + "))
}

/// Everything `estimate` and `discover` share: load, filter, and assemble
/// the study plus model configuration.
pub struct LoadedAnalysis {
    pub study: Study,
    pub config: AnalysisConfig,
    pub resolved: ResolvedConfig,
    pub seed: Option<u64>,
    pub bootstrap: Option<usize>,
    pub reuse_bounds: bool,
    pub emit_psi: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn load_analysis(args: &EstimateArgs) -> Result<LoadedAnalysis> {
    let file = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::empty(),
    };

    let network = read_network_csv(&args.network)?;
    let plants = read_unit_table_csv(&args.plants, TableKind::Intervention)?;
    let zips = read_unit_table_csv(&args.zips, TableKind::Outcome)?;

    let file_filter = file.get("filter_quantile");
    let filter_quantile = match args.filter_quantile {
        Some(q) => Some(q),
        None => file_filter.map(|v| parse_f64(&v, "filter_quantile")).transpose()?,
    };

    let mut study = Study::build_default(network, plants, zips)?;
    if let Some(q) = filter_quantile {
        let (net, tab) = filter_low_influence(&study.network, &study.outcome, q)?;
        study = Study::build_default(net, study.intervention.clone(), tab)?;
    }
    let n = study.n_outcome();

    // file values are read unconditionally so flag overrides still mark the
    // keys as consumed
    let truncation = {
        let file_component = file.get("truncate");
        let file_joint = file.get("truncate_joint");
        let component = match args.truncate.as_deref().or(file_component.as_deref()) {
            Some(t) => parse_quantile_pair(t, "truncate")?,
            None => TruncationConfig::default().component,
        };
        let joint = match args.truncate_joint.as_deref().or(file_joint.as_deref()) {
            Some(t) => parse_quantile_pair(t, "truncate_joint")?,
            None => component,
        };
        TruncationConfig { component, joint }
    };

    let file_methods = file.get("methods");
    let methods = match args.methods.as_deref().or(file_methods.as_deref()) {
        Some(m) => parse_methods(m)?,
        None => vec![Method::GComputation, Method::Aipw, Method::Saipw],
    };
    let file_estimands = file.get("estimands");
    let estimands = match args.estimands.as_deref().or(file_estimands.as_deref()) {
        Some(e) => parse_estimands(e)?,
        None => Estimand::all().to_vec(),
    };

    let file_prop = file.get("propensity_formula");
    let propensity_formula = match args.propensity_formula.as_deref().or(file_prop.as_deref()) {
        Some(f) => Formula::parse(f)?,
        None => default_formula(&study.intervention_frame()?, false)?,
    };
    let file_outcome = file.get("outcome_formula");
    let outcome_formula = match args.outcome_formula.as_deref().or(file_outcome.as_deref()) {
        Some(f) => Formula::parse(f)?,
        None => default_formula(&study.outcome_covariate_frame()?, true)?,
    };

    // population plus any configured subgroup predicates
    let mut subgroups = vec![Subgroup::all("all", n)];
    let covariate_frame = study.outcome_covariate_frame()?;
    let mut subgroup_specs = file.get_all("subgroup");
    subgroup_specs.extend(args.subgroups.iter().cloned());
    for spec in &subgroup_specs {
        let (name, predicate) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("subgroup '{}' must be 'name: predicate'", spec)))?;
        let sub = Predicate::parse(predicate)?.evaluate(&covariate_frame, name.trim())?;
        if sub.is_empty() {
            return Err(Error::Subgroup(format!("subgroup '{}' matches no outcome units", name.trim())));
        }
        subgroups.push(sub);
    }

    let file_bootstrap = file.get("bootstrap");
    let bootstrap = match args.bootstrap {
        Some(b) => Some(b),
        None => file_bootstrap.map(|v| parse_usize(&v, "bootstrap")).transpose()?,
    };
    let file_seed = file.get("seed");
    let seed = match args.seed {
        Some(s) => Some(s),
        None => file_seed.map(|v| parse_u64(&v, "seed")).transpose()?,
    };
    if bootstrap.is_some() && seed.is_none() {
        return Err(Error::Config("--seed is required when bootstrapping".into()));
    }
    file.reject_unknown()?;

    let mut resolved = ResolvedConfig::default();
    resolved.push("command", "estimate");
    resolved.push("network", args.network.display());
    resolved.push("plants", args.plants.display());
    resolved.push("zips", args.zips.display());
    resolved.push("n_intervention", study.n_intervention());
    resolved.push("n_outcome", n);
    if let Some(q) = filter_quantile {
        resolved.push("filter_quantile", q);
    }
    resolved.push("truncate", format!("{},{}", truncation.component.0, truncation.component.1));
    resolved.push("truncate_joint", format!("{},{}", truncation.joint.0, truncation.joint.1));
    resolved.push("propensity_formula", &propensity_formula);
    resolved.push("outcome_formula", &outcome_formula);
    resolved.push(
        "methods",
        methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(","),
    );
    resolved.push(
        "estimands",
        estimands
            .iter()
            .map(|e| format!("{}{}", if matches!(e, Estimand::Direct { .. }) { "tau" } else { "delta" }, e.held_level()))
            .collect::<Vec<_>>()
            .join(","),
    );
    for s in &subgroups {
        resolved.push("subgroup", format!("{} (n={})", s.name, s.len()));
    }
    if let Some(b) = bootstrap {
        resolved.push("bootstrap", b);
        resolved.push("reuse_truncation_bounds", args.reuse_truncation_bounds);
    }
    if let Some(s) = seed {
        resolved.push("seed", s);
    }

    Ok(LoadedAnalysis {
        study,
        config: AnalysisConfig { propensity_formula, outcome_formula, truncation, methods, estimands, subgroups },
        resolved,
        seed,
        bootstrap,
        reuse_bounds: args.reuse_truncation_bounds,
        emit_psi: args.emit_psi,
    })
}

pub fn run(args: EstimateArgs) -> Result<()> {
    let loaded = load_analysis(&args)?;
    if args.dry_run {
        print!("{}", loaded.resolved.render());
        return Ok(());
    }
    ensure_out_dir(&args.out_dir)?;
    loaded.resolved.write_to(&args.out_dir)?;

    let LoadedAnalysis { study, config, seed, bootstrap, reuse_bounds, emit_psi, .. } = loaded;

    let fitted = fit_analysis(&study, &config, None, None, None)?;
    let mut estimates: Vec<EffectEstimate> = Vec::new();
    for &estimand in &config.estimands {
        for &method in &config.methods {
            for subgroup in &config.subgroups {
                estimates.push(fitted.estimate(method, estimand, subgroup)?);
            }
        }
    }

    if let Some(b) = bootstrap {
        let options = BootstrapOptions { reuse_full_data_bounds: reuse_bounds, ..Default::default() };
        let run = bootstrap_effects(&study, &config, b, seed.expect("validated"), &options)?;
        for est in &mut estimates {
            est.ci = run.ci(est.estimand, est.method, est.subgroup.as_deref().unwrap_or("all"));
        }
        let mut buf = Vec::new();
        write_replicates_csv(&mut buf, &run).map_err(io_write)?;
        write_output(&args.out_dir, "replicates.csv", &buf)?;
        let mut buf = Vec::new();
        write_cis_csv(&mut buf, &run.cis).map_err(io_write)?;
        write_output(&args.out_dir, "cis.csv", &buf)?;
    }

    let mut buf = Vec::new();
    write_estimates_csv(&mut buf, &estimates).map_err(io_write)?;
    write_output(&args.out_dir, "estimates.csv", &buf)?;

    if emit_psi {
        let mut buf = Vec::new();
        write_psi_csv(&mut buf, study.network.outcome_ids(), &fitted.psi).map_err(io_write)?;
        write_output(&args.out_dir, "psi.csv", &buf)?;
    }
    Ok(())
}

pub fn io_write(source: std::io::Error) -> Error {
    Error::Io { path: "<buffer>".into(), source }
}
