//! `bni discover`: compute per-unit effect estimates, binarize covariates
//! at their medians, and report heterogeneity coefficients.

use clap::Args;

use bni_core::bipartite::subset_outcome_units;
use bni_core::bootstrap::{bootstrap_discovery, BootstrapOptions};
use bni_core::discovery::{binarize_at_median, discover};
use bni_core::effects::{Estimand, Method};
use bni_core::error::{Error, Result};
use bni_core::io::write_discovery_csv;
use bni_core::regress::quantile;
use bni_core::study::{fit_analysis, Study};

use crate::config::{ensure_out_dir, write_output, ResolvedConfig};
use crate::estimate::{load_analysis, parse_estimands, parse_methods, EstimateArgs, LoadedAnalysis};
use crate::plot::{forest_svg, ForestRow};

#[derive(Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub base: EstimateArgs,
    /// Method whose per-unit estimates feed the regression.
    #[arg(long)]
    pub method: Option<String>,
    /// Estimand whose per-unit estimates feed the regression.
    #[arg(long)]
    pub estimand: Option<String>,
    /// Two-sided outcome trimming fraction applied before estimation.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Skip the forest-plot SVG.
    #[arg(long)]
    pub no_plots: bool,
}

/// Drop outcome units whose observed outcome lies strictly outside the
/// [t, 1-t] nearest-rank quantile band.
fn trim_outcomes(study: &Study, t: f64) -> Result<Study> {
    if !(0.0..0.5).contains(&t) {
        return Err(Error::Parameter(format!("trim fraction {} outside [0, 0.5)", t)));
    }
    if t == 0.0 {
        return Ok(study.clone());
    }
    let y = study.outcome_values()?;
    let lo = quantile(y, t)?;
    let hi = quantile(y, 1.0 - t)?;
    let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i] >= lo && y[i] <= hi).collect();
    if keep.len() < 2 {
        return Err(Error::Parameter("trimming removed nearly all outcome units".into()));
    }
    let network = subset_outcome_units(&study.network, &keep)?;
    let outcome = study.outcome.select_rows(&keep);
    Study::build_default(network, study.intervention.clone(), outcome)
}

pub fn run(args: DiscoverArgs) -> Result<()> {
    let method = match &args.method {
        Some(m) => {
            let methods = parse_methods(m)?;
            if methods.len() != 1 {
                return Err(Error::Config("--method takes exactly one method".into()));
            }
            methods[0]
        }
        None => Method::Aipw,
    };
    let estimand = match &args.estimand {
        Some(e) => {
            let estimands = parse_estimands(e)?;
            if estimands.len() != 1 {
                return Err(Error::Config("--estimand takes exactly one estimand".into()));
            }
            estimands[0]
        }
        None => Estimand::Direct { held_g: 0 },
    };

    let LoadedAnalysis {
        study,
        config,
        resolved: base_resolved,
        seed,
        bootstrap: loaded_bootstrap,
        reuse_bounds,
        ..
    } = load_analysis(&args.base)?;
    let mut resolved = ResolvedConfig::default();
    resolved.push("command", "discover");
    resolved.push("method", method.label());
    resolved.push(
        "estimand",
        format!(
            "{}{}",
            if matches!(estimand, Estimand::Direct { .. }) { "tau" } else { "delta" },
            estimand.held_level()
        ),
    );
    if let Some(t) = args.trim {
        resolved.push("trim", t);
    }
    for line in base_resolved.render().lines().skip(1) {
        let (k, v) = line.split_once(" = ").unwrap_or((line, ""));
        resolved.push(k, v);
    }

    if args.base.dry_run {
        print!("{}", resolved.render());
        return Ok(());
    }
    ensure_out_dir(&args.base.out_dir)?;
    resolved.write_to(&args.base.out_dir)?;

    let trimmed;
    let study = match args.trim {
        Some(t) => {
            trimmed = trim_outcomes(&study, t)?;
            &trimmed
        }
        None => &study,
    };

    let fitted = fit_analysis(study, &config, None, None, None)?;
    let iates = fitted.iate(method, estimand)?;

    let covariates = study.outcome_covariate_frame()?;
    let binarized = binarize_at_median(&covariates)?;
    let mut report = discover(&iates, &binarized, estimand, method)?;

    // optional percentile intervals in place of the sandwich CIs
    if let Some(b) = loaded_bootstrap {
        let options = BootstrapOptions { reuse_full_data_bounds: reuse_bounds, ..Default::default() };
        let boot = bootstrap_discovery(study, &config, method, estimand, b, seed.expect("validated"), &options)?;
        for row in &mut report.rows {
            if let Some((_, lo, hi)) = boot.cis.iter().find(|(name, _, _)| name == &row.covariate) {
                row.ci_lower = *lo;
                row.ci_upper = *hi;
                row.significant = *lo > 0.0 || *hi < 0.0;
            }
        }
    }

    let mut buf = Vec::new();
    write_discovery_csv(&mut buf, &report).map_err(crate::estimate::io_write)?;
    write_output(&args.base.out_dir, "discovery.csv", &buf)?;

    if !args.no_plots {
        let rows: Vec<ForestRow> = report
            .rows
            .iter()
            .map(|r| ForestRow {
                label: format!("{} > {}", r.covariate, trim_digits(r.cut)),
                estimate: r.coefficient,
                lower: r.ci_lower,
                upper: r.ci_upper,
                significant: r.significant,
            })
            .collect();
        let title = format!(
            "Deviations from the average {} effect ({})",
            estimand.kind_label(),
            method.label()
        );
        write_output(&args.base.out_dir, "forest.svg", forest_svg(&title, &rows).as_bytes())?;
    }
    Ok(())
}

fn trim_digits(v: f64) -> String {
    let s = format!("{:.4}", v);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
