//! `bni simulate`: run a grid of Monte Carlo scenarios and emit percent
//! absolute bias tables, a quartile summary, and optional boxplots.

use std::path::PathBuf;

use clap::Args;

use bni_core::effects::Method;
use bni_core::error::{Error, Result};
use bni_core::io::{write_ab_csv, write_ab_summary_csv};
use bni_core::propensity::TruncationConfig;
use bni_core::rng::derive_seed;
use bni_core::simgen::{run_scenario, summarize_ab, Misspec, SimScenario, SyntheticConfig};

use crate::config::{
    ensure_out_dir, parse_f64, parse_f64_list, parse_quantile_pair, parse_usize, write_output,
    ConfigMap, ResolvedConfig,
};
use crate::estimate::io_write;
use crate::plot::{boxplot_svg, BoxStats};

#[derive(Args)]
pub struct SimulateArgs {
    /// `key = value` scenario configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Root seed (all randomness derives from it).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the scenario letters from the config file.
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Override the replication count from the config file.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Skip SVG boxplot emission.
    #[arg(long)]
    pub no_plots: bool,
    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    pub dry_run: bool,
}

struct Grid {
    scenarios: Vec<Misspec>,
    sample_proportions: Vec<f64>,
    sigma2s: Vec<f64>,
    xis: Vec<f64>,
    replications: usize,
    synthetic: SyntheticConfig,
    filter_quantile: Option<f64>,
    truncation: TruncationConfig,
}

fn parse_grid(args: &SimulateArgs, file: &ConfigMap) -> Result<Grid> {
    // file values are read unconditionally so flag overrides still mark the
    // keys as consumed
    let file_scenarios = file.get("scenarios");
    let scenarios_text = args
        .scenarios
        .clone()
        .or(file_scenarios)
        .unwrap_or_else(|| "A,B,C,D".into());
    let scenarios: Vec<Misspec> =
        scenarios_text.split(',').map(Misspec::parse).collect::<Result<_>>()?;

    let file_replications = file.get("replications");
    let replications = match args.replications {
        Some(r) => r,
        None => file_replications
            .map(|v| parse_usize(&v, "replications"))
            .transpose()?
            .unwrap_or(1000),
    };

    let synthetic = SyntheticConfig {
        n_intervention: file
            .get("j")
            .map(|v| parse_usize(&v, "j"))
            .transpose()?
            .unwrap_or(SyntheticConfig::default().n_intervention),
        n_outcome: file
            .get("n")
            .map(|v| parse_usize(&v, "n"))
            .transpose()?
            .unwrap_or(SyntheticConfig::default().n_outcome),
        decay: file
            .get("decay")
            .map(|v| parse_f64(&v, "decay"))
            .transpose()?
            .unwrap_or(SyntheticConfig::default().decay),
        weight_noise_sd: file
            .get("weight_noise_sd")
            .map(|v| parse_f64(&v, "weight_noise_sd"))
            .transpose()?
            .unwrap_or(SyntheticConfig::default().weight_noise_sd),
    };

    let filter_quantile = match file.get("filter_quantile") {
        None => Some(0.25),
        Some(v) if v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("off") => None,
        Some(v) => Some(parse_f64(&v, "filter_quantile")?),
    };

    let component = match file.get("truncate") {
        Some(t) => parse_quantile_pair(&t, "truncate")?,
        None => TruncationConfig::default().component,
    };
    let joint = match file.get("truncate_joint") {
        Some(t) => parse_quantile_pair(&t, "truncate_joint")?,
        None => component,
    };

    Ok(Grid {
        scenarios,
        sample_proportions: match file.get("sample_proportion") {
            Some(v) => parse_f64_list(&v, "sample_proportion")?,
            None => vec![1.0],
        },
        sigma2s: match file.get("sigma2") {
            Some(v) => parse_f64_list(&v, "sigma2")?,
            None => vec![1.0],
        },
        xis: match file.get("xi") {
            Some(v) => parse_f64_list(&v, "xi")?,
            None => vec![1.0],
        },
        replications,
        synthetic,
        filter_quantile,
        truncation: TruncationConfig { component, joint },
    })
}

fn combo_label(grid: &Grid, misspec: Misspec, prop: f64, sigma2: f64, xi: f64) -> String {
    let mut label = misspec.label().to_string();
    if grid.sample_proportions.len() > 1 {
        label.push_str(&format!("_p{}", prop));
    }
    if grid.sigma2s.len() > 1 {
        label.push_str(&format!("_v{}", sigma2));
    }
    if grid.xis.len() > 1 {
        label.push_str(&format!("_x{}", xi));
    }
    label
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let file = ConfigMap::load(&args.config)?;
    let grid = parse_grid(&args, &file)?;
    file.reject_unknown()?;
    let seed = args
        .seed
        .ok_or_else(|| Error::Config("--seed is required for simulate".into()))?;

    let mut resolved = ResolvedConfig::default();
    resolved.push("command", "simulate");
    resolved.push("seed", seed);
    resolved.push(
        "scenarios",
        grid.scenarios.iter().map(|m| m.label()).collect::<Vec<_>>().join(","),
    );
    resolved.push("replications", grid.replications);
    resolved.push("j", grid.synthetic.n_intervention);
    resolved.push("n", grid.synthetic.n_outcome);
    resolved.push("decay", grid.synthetic.decay);
    resolved.push("weight_noise_sd", grid.synthetic.weight_noise_sd);
    match grid.filter_quantile {
        Some(q) => resolved.push("filter_quantile", q),
        None => resolved.push("filter_quantile", "none"),
    }
    resolved.push("truncate", format!("{},{}", grid.truncation.component.0, grid.truncation.component.1));
    resolved.push("truncate_joint", format!("{},{}", grid.truncation.joint.0, grid.truncation.joint.1));
    resolved.push(
        "sample_proportion",
        grid.sample_proportions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    resolved.push("sigma2", grid.sigma2s.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    resolved.push("xi", grid.xis.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    resolved.push("plots", !args.no_plots);

    if args.dry_run {
        print!("{}", resolved.render());
        return Ok(());
    }
    ensure_out_dir(&args.out_dir)?;
    resolved.write_to(&args.out_dir)?;

    let mut outputs = Vec::new();
    let mut combo_index = 0u64;
    for &misspec in &grid.scenarios {
        for &prop in &grid.sample_proportions {
            for &sigma2 in &grid.sigma2s {
                for &xi in &grid.xis {
                    let scenario = SimScenario {
                        misspec,
                        sample_proportion: prop,
                        sigma2,
                        xi,
                        replications: grid.replications,
                        seed: derive_seed(seed, combo_index),
                        synthetic: grid.synthetic,
                        filter_quantile: grid.filter_quantile,
                        truncation: grid.truncation,
                    };
                    let label = combo_label(&grid, misspec, prop, sigma2, xi);
                    let output = run_scenario(&scenario)?;
                    for failure in &output.failures {
                        eprintln!("warning: scenario {}: {}", label, failure);
                    }
                    outputs.push((label, output));
                    combo_index += 1;
                }
            }
        }
    }

    let labeled_rows: Vec<(String, &[bni_core::simgen::AbRow])> =
        outputs.iter().map(|(l, o)| (l.clone(), o.rows.as_slice())).collect();
    let mut buf = Vec::new();
    write_ab_csv(&mut buf, &labeled_rows).map_err(io_write)?;
    write_output(&args.out_dir, "ab.csv", &buf)?;

    let summaries: Vec<(String, Vec<bni_core::simgen::AbSummaryRow>)> =
        outputs.iter().map(|(l, o)| (l.clone(), summarize_ab(&o.rows))).collect();
    let mut buf = Vec::new();
    write_ab_summary_csv(&mut buf, &summaries).map_err(io_write)?;
    write_output(&args.out_dir, "ab_summary.csv", &buf)?;

    if !args.no_plots {
        for (kind, file_name) in [("direct", "boxplot_direct.svg"), ("spillover", "boxplot_spillover.svg")] {
            let mut boxes = Vec::new();
            for (label, rows) in &summaries {
                for row in rows.iter().filter(|r| r.estimand_kind == kind) {
                    // whiskers at the quartiles +/- 1.5 IQR, clipped to zero
                    let iqr = row.q3 - row.q1;
                    boxes.push(BoxStats {
                        label: format!("{} {}", label, row.method.label()),
                        median: row.median,
                        q1: row.q1,
                        q3: row.q3,
                        lo: (row.q1 - 1.5 * iqr).max(0.0),
                        hi: row.q3 + 1.5 * iqr,
                    });
                }
            }
            let title = format!("Percent absolute bias, {} effects", kind);
            let svg = boxplot_svg(&title, "percent absolute bias", &boxes);
            write_output(&args.out_dir, file_name, svg.as_bytes())?;
        }
    }

    // settle the method ordering in the summary for readers of stdout
    for (label, output) in &outputs {
        let med = |m: Method, direct: bool| {
            output
                .median_ab(direct, m)
                .map(|v| format!("{:.3}", v))
                .unwrap_or_else(|| "-".into())
        };
        println!(
            "scenario {}: n={} direct medians G/AIPW/SAIPW = {}/{}/{} spillover = {}/{}/{}",
            label,
            output.n_analyzed,
            med(Method::GComputation, true),
            med(Method::Aipw, true),
            med(Method::Saipw, true),
            med(Method::GComputation, false),
            med(Method::Aipw, false),
            med(Method::Saipw, false),
        );
    }
    Ok(())
}
