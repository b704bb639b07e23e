//! `bni derive`: read the network and unit tables, derive the exposure
//! structure, and emit `outcome_id,key_id,upwind_id,Z,G`.

use std::path::PathBuf;

use clap::Args;

use bni_core::bipartite::{derive_exposure_structure, filter_low_influence, map_treatments, SecondRanked};
use bni_core::error::{Error, Result};
use bni_core::io::{read_network_csv, read_unit_table_csv, write_exposure_csv, TableKind};
use bni_core::study::align_table;

use crate::config::write_output;

#[derive(Args)]
pub struct DeriveArgs {
    /// Network CSV (`intervention_id,outcome_id,weight`).
    #[arg(long)]
    pub network: PathBuf,
    /// Intervention-unit table CSV (`id,<covariate...>,treatment`).
    #[arg(long)]
    pub plants: PathBuf,
    /// Outcome-unit table CSV (`id,<covariate...>[,outcome]`).
    #[arg(long)]
    pub zips: PathBuf,
    /// Output exposure CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Drop outcome units with key weights below this quantile first.
    #[arg(long)]
    pub filter_quantile: Option<f64>,
}

pub fn run(args: DeriveArgs) -> Result<()> {
    let mut network = read_network_csv(&args.network)?;
    let plants = read_unit_table_csv(&args.plants, TableKind::Intervention)?;
    let zips = read_unit_table_csv(&args.zips, TableKind::Outcome)?;

    derive_exposure_structure(&mut network, &SecondRanked)?;
    let mut zips = align_table(&zips, network.outcome_ids(), "outcome")?;
    if let Some(q) = args.filter_quantile {
        let (fnet, fzips) = filter_low_influence(&network, &zips, q)?;
        network = fnet;
        zips = fzips;
    }
    let _ = zips; // covariates are not needed beyond the filter

    let plants = align_table(&plants, network.intervention_ids(), "intervention")?;
    let treatments = plants
        .treatment
        .ok_or_else(|| Error::Format(format!("{}: no treatment column", args.plants.display())))?;
    let assignment = map_treatments(&network, &treatments, &SecondRanked)?;

    let mut buf = Vec::new();
    write_exposure_csv(&mut buf, &network, &assignment)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::Io { path: parent.display().to_string(), source: e })?;
        }
    }
    write_output(
        args.out.parent().unwrap_or_else(|| std::path::Path::new(".")),
        args.out
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config("bad --out path".into()))?,
        &buf,
    )
}
