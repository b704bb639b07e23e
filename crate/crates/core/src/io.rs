//! CSV ingestion and emission.
//!
//! All files are UTF-8, comma-delimited with `.` decimal separators and a
//! required header row; fields may not contain commas or quotes. Floats are
//! written with 17 significant digits so emitted tables are byte-stable and
//! round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bipartite::{BipartiteNetwork, ExposureAssignment};
use crate::bootstrap::{BootstrapRun, CiRow};
use crate::discovery::DiscoveryReport;
use crate::effects::{EffectEstimate, Estimand};
use crate::error::{Error, Result};
use crate::propensity::cell_index;
use crate::simgen::{AbRow, AbSummaryRow};
use crate::table::{Frame, UnitTable};

/// Format a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{:.16e}", v)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn split_row(line: &str) -> Vec<String> {
    line.split(',').map(|f| f.trim().to_string()).collect()
}

fn parse_float(field: &str, path: &Path, line_no: usize, column: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::Format(format!(
            "{}:{}: column '{}' value '{}' is not a number",
            path.display(),
            line_no,
            column,
            field
        ))
    })
}

/// Read a network file with header `intervention_id,outcome_id,weight`.
pub fn read_network_csv(path: impl AsRef<Path>) -> Result<BipartiteNetwork> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut iter = lines.iter();
    let header = iter
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    let cols = split_row(header);
    let expected = ["intervention_id", "outcome_id", "weight"];
    if cols.len() != 3 || cols.iter().zip(&expected).any(|(a, b)| a != b) {
        let bad = cols
            .iter()
            .zip(&expected)
            .find(|(a, b)| a != *b)
            .map(|(a, b)| format!("found '{}', expected '{}'", a, b))
            .unwrap_or_else(|| format!("expected 3 columns, found {}", cols.len()));
        return Err(Error::Format(format!("{}: malformed header: {}", path.display(), bad)));
    }
    let mut triplets = Vec::new();
    for (idx, line) in iter.enumerate() {
        let fields = split_row(line);
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "{}:{}: expected 3 fields, found {}",
                path.display(),
                idx + 2,
                fields.len()
            )));
        }
        let w = parse_float(&fields[2], path, idx + 2, "weight")?;
        triplets.push((fields[0].clone(), fields[1].clone(), w));
    }
    crate::bipartite::load_network(&triplets)
}

/// Write a network back out in `intervention_id,outcome_id,weight` form.
pub fn write_network_csv<W: Write>(out: &mut W, network: &BipartiteNetwork) -> std::io::Result<()> {
    writeln!(out, "intervention_id,outcome_id,weight")?;
    for &(j, i, w) in network.entries() {
        writeln!(
            out,
            "{},{},{}",
            network.intervention_ids()[j],
            network.outcome_ids()[i],
            fmt_float(w)
        )?;
    }
    Ok(())
}

/// Which special trailing column a unit table may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// `id,<covariate...>[,treatment]`
    Intervention,
    /// `id,<covariate...>[,outcome]`
    Outcome,
}

/// Read a unit table. The first column must be `id`; a trailing
/// `treatment` (intervention side) or `outcome` (outcome side) column is
/// picked up when present; all other columns are numeric covariates.
pub fn read_unit_table_csv(path: impl AsRef<Path>, kind: TableKind) -> Result<UnitTable> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut iter = lines.iter();
    let header = iter
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    let cols = split_row(header);
    if cols.is_empty() || cols[0] != "id" {
        return Err(Error::Format(format!(
            "{}: malformed header: first column must be 'id', found '{}'",
            path.display(),
            cols.first().cloned().unwrap_or_default()
        )));
    }
    let special = match kind {
        TableKind::Intervention => "treatment",
        TableKind::Outcome => "outcome",
    };
    let has_special = cols.last().map(String::as_str) == Some(special);
    let covariate_names: Vec<String> = {
        let end = if has_special { cols.len() - 1 } else { cols.len() };
        cols[1..end].to_vec()
    };

    let mut ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); covariate_names.len()];
    let mut special_values: Vec<f64> = Vec::new();
    for (idx, line) in iter.enumerate() {
        let fields = split_row(line);
        if fields.len() != cols.len() {
            return Err(Error::Format(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                idx + 2,
                cols.len(),
                fields.len()
            )));
        }
        ids.push(fields[0].clone());
        for (c, name) in covariate_names.iter().enumerate() {
            columns[c].push(parse_float(&fields[c + 1], path, idx + 2, name)?);
        }
        if has_special {
            special_values.push(parse_float(fields.last().unwrap(), path, idx + 2, special)?);
        }
    }

    let mut frame = Frame::new();
    for (name, col) in covariate_names.into_iter().zip(columns) {
        frame.push_column(name, col)?;
    }
    let mut table = UnitTable::new(ids, frame)?;
    if has_special {
        match kind {
            TableKind::Intervention => {
                let t: Result<Vec<u8>> = special_values
                    .iter()
                    .map(|&v| {
                        if v == 0.0 {
                            Ok(0u8)
                        } else if v == 1.0 {
                            Ok(1u8)
                        } else {
                            Err(Error::Format(format!(
                                "{}: treatment value {} is not 0/1",
                                path.display(),
                                v
                            )))
                        }
                    })
                    .collect();
                table = table.with_treatment(t?)?;
            }
            TableKind::Outcome => {
                table = table.with_outcome(special_values)?;
            }
        }
    }
    Ok(table)
}

/// Exposure export: `outcome_id,key_id,upwind_id,Z,G`.
pub fn write_exposure_csv<W: Write>(
    out: &mut W,
    network: &BipartiteNetwork,
    assignment: &ExposureAssignment,
) -> Result<()> {
    let key_of = network.key_of()?;
    let upwind = network.single_upwind_of()?;
    writeln!(out, "outcome_id,key_id,upwind_id,Z,G").map_err(Error::from_io)?;
    for i in 0..network.n_outcome() {
        writeln!(
            out,
            "{},{},{},{},{}",
            network.outcome_ids()[i],
            network.intervention_ids()[key_of[i]],
            network.intervention_ids()[upwind[i]],
            assignment.key[i],
            assignment.upwind[i]
        )
        .map_err(Error::from_io)?;
    }
    Ok(())
}

/// Joint propensity export: `outcome_id,psi_11,psi_10,psi_01,psi_00`.
pub fn write_psi_csv<W: Write>(
    out: &mut W,
    outcome_ids: &[String],
    psi: &[[f64; 4]],
) -> std::io::Result<()> {
    writeln!(out, "outcome_id,psi_11,psi_10,psi_01,psi_00")?;
    for (id, cells) in outcome_ids.iter().zip(psi) {
        writeln!(
            out,
            "{},{},{},{},{}",
            id,
            fmt_float(cells[cell_index(1, 1)]),
            fmt_float(cells[cell_index(1, 0)]),
            fmt_float(cells[cell_index(0, 1)]),
            fmt_float(cells[cell_index(0, 0)])
        )?;
    }
    Ok(())
}

/// Estimates export:
/// `estimand,held_level,method,subgroup,n_x,estimate,ci_lower,ci_upper`.
pub fn write_estimates_csv<W: Write>(out: &mut W, estimates: &[EffectEstimate]) -> std::io::Result<()> {
    writeln!(out, "estimand,held_level,method,subgroup,n_x,estimate,ci_lower,ci_upper")?;
    for e in estimates {
        let (lo, hi) = match e.ci {
            Some((lo, hi)) => (fmt_float(lo), fmt_float(hi)),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.estimand.kind_label(),
            e.estimand.held_level(),
            e.method.label(),
            e.subgroup.as_deref().unwrap_or("all"),
            e.n_x,
            fmt_float(e.estimate),
            lo,
            hi
        )?;
    }
    Ok(())
}

/// Discovery report export:
/// `covariate,coefficient,ci_lower,ci_upper,significant`.
pub fn write_discovery_csv<W: Write>(out: &mut W, report: &DiscoveryReport) -> std::io::Result<()> {
    writeln!(out, "covariate,coefficient,ci_lower,ci_upper,significant")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.covariate,
            fmt_float(row.coefficient),
            fmt_float(row.ci_lower),
            fmt_float(row.ci_upper),
            row.significant
        )?;
    }
    Ok(())
}

fn estimand_code(e: Estimand) -> String {
    match e {
        Estimand::Direct { held_g } => format!("tau({})", held_g),
        Estimand::Spillover { held_z } => format!("delta({})", held_z),
    }
}

/// Bootstrap replicate export:
/// `replicate,estimand,held_level,method,subgroup,estimate`.
pub fn write_replicates_csv<W: Write>(out: &mut W, run: &BootstrapRun) -> std::io::Result<()> {
    writeln!(out, "replicate,estimand,held_level,method,subgroup,estimate")?;
    for r in &run.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.replicate,
            r.estimand.kind_label(),
            r.estimand.held_level(),
            r.method.label(),
            r.subgroup,
            fmt_float(r.estimate)
        )?;
    }
    Ok(())
}

/// Bootstrap interval export:
/// `estimand,held_level,method,subgroup,ci_lower,ci_upper`.
pub fn write_cis_csv<W: Write>(out: &mut W, cis: &[CiRow]) -> std::io::Result<()> {
    writeln!(out, "estimand,held_level,method,subgroup,ci_lower,ci_upper")?;
    for c in cis {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.estimand.kind_label(),
            c.estimand.held_level(),
            c.method.label(),
            c.subgroup,
            fmt_float(c.lower),
            fmt_float(c.upper)
        )?;
    }
    Ok(())
}

/// Raw AB export: `scenario,replicate,subgroup,estimand,method,ab`.
pub fn write_ab_csv<W: Write>(out: &mut W, labeled: &[(String, &[AbRow])]) -> std::io::Result<()> {
    writeln!(out, "scenario,replicate,subgroup,estimand,method,ab")?;
    for (label, rows) in labeled {
        for r in *rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                label,
                r.replicate,
                r.subgroup,
                estimand_code(r.estimand),
                r.method.label(),
                fmt_float(r.ab)
            )?;
        }
    }
    Ok(())
}

/// AB summary export: `scenario,estimand,method,n,median,q1,q3`.
pub fn write_ab_summary_csv<W: Write>(
    out: &mut W,
    labeled: &[(String, Vec<AbSummaryRow>)],
) -> std::io::Result<()> {
    writeln!(out, "scenario,estimand,method,n,median,q1,q3")?;
    for (label, rows) in labeled {
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                label,
                r.estimand_kind,
                r.method.label(),
                r.count,
                fmt_float(r.median),
                fmt_float(r.q1),
                fmt_float(r.q3)
            )?;
        }
    }
    Ok(())
}

impl Error {
    fn from_io(source: std::io::Error) -> Error {
        Error::Io { path: "<writer>".into(), source }
    }
}
