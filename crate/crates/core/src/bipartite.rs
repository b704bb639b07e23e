//! Bipartite interference graph: ingestion, exposure structure, covariate
//! summaries, and treatment mapping.
//!
//! Interventions are applied to one set of units and outcomes measured on a
//! disjoint set; a weighted bipartite graph links the two. Each outcome unit
//! derives a *key-associated* intervention unit (largest incident weight)
//! and an *upwind* set (through a pluggable exposure mapping; the built-in
//! mapping selects the second-largest-weight unit). Treatments at the
//! intervention level then map to a per-outcome pair `(Z, G)`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::regress::quantile;
use crate::table::{Frame, UnitTable};

/// Collapses the non-key neighborhood of an outcome unit into a binary
/// upwind exposure. Implementations choose which incident intervention
/// units form the upwind set and how their treatments combine.
pub trait ExposureMapping: Send + Sync {
    fn name(&self) -> &str;

    /// Select the upwind units from the incident `(intervention, weight)`
    /// pairs, sorted by descending weight with the key-associated unit at
    /// position 0. Must not select position 0.
    fn upwind_units(&self, ranked: &[(usize, f64)]) -> Vec<usize>;

    /// Map the upwind units' treatments to the binary exposure `G`.
    fn exposure(&self, upwind_treatments: &[u8]) -> u8;
}

/// Built-in mapping: upwind treatment is the treatment of the
/// second-largest-weight intervention unit.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondRanked;

impl ExposureMapping for SecondRanked {
    fn name(&self) -> &str {
        "second-ranked"
    }

    fn upwind_units(&self, ranked: &[(usize, f64)]) -> Vec<usize> {
        vec![ranked[1].0]
    }

    fn exposure(&self, upwind_treatments: &[u8]) -> u8 {
        upwind_treatments[0]
    }
}

/// Sparse nonnegative influence matrix between intervention and outcome
/// units, plus the derived exposure structure.
#[derive(Debug, Clone)]
pub struct BipartiteNetwork {
    intervention_ids: Vec<String>,
    outcome_ids: Vec<String>,
    /// (intervention index, outcome index, weight)
    entries: Vec<(usize, usize, f64)>,
    key_of: Option<Vec<usize>>,
    upwind_of: Option<Vec<Vec<usize>>>,
    key_weight: Option<Vec<f64>>,
}

impl BipartiteNetwork {
    /// Number of intervention units.
    pub fn n_intervention(&self) -> usize {
        self.intervention_ids.len()
    }

    /// Number of outcome units.
    pub fn n_outcome(&self) -> usize {
        self.outcome_ids.len()
    }

    pub fn intervention_ids(&self) -> &[String] {
        &self.intervention_ids
    }

    pub fn outcome_ids(&self) -> &[String] {
        &self.outcome_ids
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_derived(&self) -> bool {
        self.key_of.is_some()
    }

    /// Key-associated intervention index per outcome unit.
    pub fn key_of(&self) -> Result<&[usize]> {
        self.key_of
            .as_deref()
            .ok_or_else(|| Error::Structure("exposure structure not derived".into()))
    }

    /// Upwind intervention index set per outcome unit.
    pub fn upwind_of(&self) -> Result<&[Vec<usize>]> {
        self.upwind_of
            .as_deref()
            .ok_or_else(|| Error::Structure("exposure structure not derived".into()))
    }

    /// Weight of each outcome unit's key-associated link.
    pub fn key_weights(&self) -> Result<&[f64]> {
        self.key_weight
            .as_deref()
            .ok_or_else(|| Error::Structure("exposure structure not derived".into()))
    }

    /// Upwind index per outcome unit for single-unit mappings.
    pub fn single_upwind_of(&self) -> Result<Vec<usize>> {
        let upwind = self.upwind_of()?;
        upwind
            .iter()
            .map(|set| {
                if set.len() == 1 {
                    Ok(set[0])
                } else {
                    Err(Error::Mapping(format!(
                        "expected a single upwind unit, found {}",
                        set.len()
                    )))
                }
            })
            .collect()
    }

    /// Incident `(intervention, weight)` lists per outcome unit.
    fn incidence(&self) -> Vec<Vec<(usize, f64)>> {
        let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_outcome()];
        for &(j, i, w) in &self.entries {
            incident[i].push((j, w));
        }
        incident
    }
}

/// Build a network from `(intervention id, outcome id, weight)` triplets.
/// Indices are assigned in first-appearance order; duplicate pairs and
/// negative or non-finite weights are rejected.
pub fn load_network(triplets: &[(String, String, f64)]) -> Result<BipartiteNetwork> {
    let mut intervention_ids: Vec<String> = Vec::new();
    let mut outcome_ids: Vec<String> = Vec::new();
    let mut int_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut out_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut seen_pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut entries = Vec::with_capacity(triplets.len());

    for (int_id, out_id, weight) in triplets {
        if int_id.is_empty() || out_id.is_empty() {
            return Err(Error::Format("empty unit id in network triplet".into()));
        }
        if !weight.is_finite() || *weight < 0.0 {
            return Err(Error::Format(format!(
                "weight {} for ({}, {}) is not a finite nonnegative number",
                weight, int_id, out_id
            )));
        }
        let j = *int_index.entry(int_id.clone()).or_insert_with(|| {
            intervention_ids.push(int_id.clone());
            intervention_ids.len() - 1
        });
        let i = *out_index.entry(out_id.clone()).or_insert_with(|| {
            outcome_ids.push(out_id.clone());
            outcome_ids.len() - 1
        });
        if !seen_pairs.insert((j, i)) {
            return Err(Error::Duplicate(format!("network pair ({}, {})", int_id, out_id)));
        }
        entries.push((j, i, *weight));
    }

    Ok(BipartiteNetwork {
        intervention_ids,
        outcome_ids,
        entries,
        key_of: None,
        upwind_of: None,
        key_weight: None,
    })
}

/// Populate `key_of` / `upwind_of` for every outcome unit.
///
/// The key-associated unit is the incident unit with the largest weight;
/// ties break toward the smallest intervention index at every rank, so the
/// derivation is deterministic and order-independent. Every outcome unit
/// needs at least two incident intervention units.
pub fn derive_exposure_structure(
    network: &mut BipartiteNetwork,
    mapping: &dyn ExposureMapping,
) -> Result<()> {
    let incident = network.incidence();
    let mut key_of = Vec::with_capacity(network.n_outcome());
    let mut upwind_of = Vec::with_capacity(network.n_outcome());
    let mut key_weight = Vec::with_capacity(network.n_outcome());

    for (i, list) in incident.iter().enumerate() {
        if list.len() < 2 {
            return Err(Error::DegenerateStructure(format!(
                "outcome unit '{}' has {} incident intervention unit(s), need at least 2",
                network.outcome_ids[i],
                list.len()
            )));
        }
        let mut ranked = list.clone();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let upwind = mapping.upwind_units(&ranked);
        if upwind.is_empty() {
            return Err(Error::Mapping(format!(
                "mapping '{}' selected no upwind units for outcome '{}'",
                mapping.name(),
                network.outcome_ids[i]
            )));
        }
        if upwind.contains(&ranked[0].0) {
            return Err(Error::Mapping(format!(
                "mapping '{}' selected the key-associated unit as upwind for outcome '{}'",
                mapping.name(),
                network.outcome_ids[i]
            )));
        }
        key_of.push(ranked[0].0);
        key_weight.push(ranked[0].1);
        upwind_of.push(upwind);
    }

    network.key_of = Some(key_of);
    network.upwind_of = Some(upwind_of);
    network.key_weight = Some(key_weight);
    Ok(())
}

/// Restrict a derived network to the given outcome units (strictly
/// increasing indices), dropping intervention units left with no incident
/// outcome unit. The derived structure is carried over (re-indexed), not
/// re-derived; retained outcome units keep all their incident entries, so
/// the carried structure equals a fresh derivation.
pub fn subset_outcome_units(network: &BipartiteNetwork, keep_outcome: &[usize]) -> Result<BipartiteNetwork> {
    let key_of = network.key_of()?;
    let key_weights = network.key_weights()?;
    let upwind_of = network.upwind_of()?;
    if keep_outcome.windows(2).any(|w| w[0] >= w[1])
        || keep_outcome.iter().any(|&i| i >= network.n_outcome())
    {
        return Err(Error::Parameter("outcome subset must be strictly increasing and in range".into()));
    }

    let mut keep_int_flag = vec![false; network.n_intervention()];
    let keep_set: HashSet<usize> = keep_outcome.iter().copied().collect();
    for &(j, i, _) in &network.entries {
        if keep_set.contains(&i) {
            keep_int_flag[j] = true;
        }
    }
    let keep_int: Vec<usize> = (0..network.n_intervention()).filter(|&j| keep_int_flag[j]).collect();

    let mut new_int_index = vec![usize::MAX; network.n_intervention()];
    for (new, &old) in keep_int.iter().enumerate() {
        new_int_index[old] = new;
    }
    let mut new_out_index = vec![usize::MAX; network.n_outcome()];
    for (new, &old) in keep_outcome.iter().enumerate() {
        new_out_index[old] = new;
    }

    let entries = network
        .entries
        .iter()
        .filter(|&&(_, i, _)| keep_set.contains(&i))
        .map(|&(j, i, w)| (new_int_index[j], new_out_index[i], w))
        .collect();

    Ok(BipartiteNetwork {
        intervention_ids: keep_int.iter().map(|&j| network.intervention_ids[j].clone()).collect(),
        outcome_ids: keep_outcome.iter().map(|&i| network.outcome_ids[i].clone()).collect(),
        entries,
        key_of: Some(keep_outcome.iter().map(|&i| new_int_index[key_of[i]]).collect()),
        upwind_of: Some(
            keep_outcome
                .iter()
                .map(|&i| upwind_of[i].iter().map(|&j| new_int_index[j]).collect())
                .collect(),
        ),
        key_weight: Some(keep_outcome.iter().map(|&i| key_weights[i]).collect()),
    })
}

/// Drop outcome units whose key-associated weight falls strictly below the
/// `q` nearest-rank quantile of all key-associated weights, then drop
/// intervention units left with no incident outcome units.
pub fn filter_low_influence(
    network: &BipartiteNetwork,
    outcome_table: &UnitTable,
    q: f64,
) -> Result<(BipartiteNetwork, UnitTable)> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Parameter(format!("filter quantile {} outside [0, 1)", q)));
    }
    let key_weights = network.key_weights()?;
    if outcome_table.len() != network.n_outcome() {
        return Err(Error::Dimension(format!(
            "outcome table has {} rows, network has {} outcome units",
            outcome_table.len(),
            network.n_outcome()
        )));
    }

    let threshold = quantile(key_weights, q)?;
    let keep_outcome: Vec<usize> = (0..network.n_outcome())
        .filter(|&i| key_weights[i] >= threshold)
        .collect();
    let filtered = subset_outcome_units(network, &keep_outcome)?;
    Ok((filtered, outcome_table.select_rows(&keep_outcome)))
}

/// Which association role a covariate summary aggregates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRole {
    Key,
    Upwind,
}

impl EtaRole {
    pub fn prefix(self) -> &'static str {
        match self {
            EtaRole::Key => "Key",
            EtaRole::Upwind => "Upwind",
        }
    }
}

/// Per-intervention-unit means of outcome covariates over the units the
/// intervention unit holds a given role for. Units holding the role for no
/// outcome unit are flagged empty rather than dropped.
#[derive(Debug, Clone)]
pub struct EtaSummary {
    pub role: EtaRole,
    pub covariate_names: Vec<String>,
    /// `n_intervention x n_covariates` matrix of group means; rows flagged
    /// empty hold zeros.
    pub values: Matrix,
    pub nonempty: Vec<bool>,
}

impl EtaSummary {
    /// Values with empty rows imputed by the column mean over non-empty
    /// groups, keeping every intervention unit usable downstream.
    pub fn imputed(&self) -> Matrix {
        let mut out = self.values.clone();
        let rows = out.rows();
        let cols = out.cols();
        for c in 0..cols {
            let mut sum = 0.0;
            let mut count = 0usize;
            for r in 0..rows {
                if self.nonempty[r] {
                    sum += out.get(r, c);
                    count += 1;
                }
            }
            let mean = if count > 0 { sum / count as f64 } else { 0.0 };
            for r in 0..rows {
                if !self.nonempty[r] {
                    out.set(r, c, mean);
                }
            }
        }
        out
    }

    /// Imputed values as named columns, prefixed by role (e.g. `KeyLogPop`).
    pub fn to_frame(&self) -> Result<Frame> {
        let imputed = self.imputed();
        let mut frame = Frame::new();
        for (c, name) in self.covariate_names.iter().enumerate() {
            let col = (0..imputed.rows()).map(|r| imputed.get(r, c)).collect();
            frame.push_column(format!("{}{}", self.role.prefix(), name), col)?;
        }
        Ok(frame)
    }
}

/// Mean outcome covariates per intervention unit over the outcome units it
/// serves the given role for (the eta function of the propensity model).
pub fn summarize_outcome_covariates(
    network: &BipartiteNetwork,
    outcome_table: &UnitTable,
    role: EtaRole,
) -> Result<EtaSummary> {
    let key_of = network.key_of()?;
    let upwind_of = network.upwind_of()?;
    if outcome_table.len() != network.n_outcome() {
        return Err(Error::Dimension("outcome table / network size mismatch".into()));
    }
    let j_count = network.n_intervention();
    let cov = &outcome_table.covariates;
    let p = cov.ncols();

    let mut sums = Matrix::zeros(j_count, p);
    let mut counts = vec![0usize; j_count];
    let mut add = |j: usize, i: usize| {
        counts[j] += 1;
        for (c, name) in cov.names().iter().enumerate() {
            let col = cov.column(name).expect("known column");
            let v = sums.get(j, c) + col[i];
            sums.set(j, c, v);
        }
    };

    match role {
        EtaRole::Key => {
            for (i, &j) in key_of.iter().enumerate() {
                add(j, i);
            }
        }
        EtaRole::Upwind => {
            for (i, set) in upwind_of.iter().enumerate() {
                for &j in set {
                    add(j, i);
                }
            }
        }
    }

    let mut values = Matrix::zeros(j_count, p);
    let mut nonempty = vec![false; j_count];
    for j in 0..j_count {
        if counts[j] > 0 {
            nonempty[j] = true;
            for c in 0..p {
                values.set(j, c, sums.get(j, c) / counts[j] as f64);
            }
        }
    }

    Ok(EtaSummary { role, covariate_names: cov.names().to_vec(), values, nonempty })
}

/// Per-outcome-unit binary exposures: key-associated treatment `Z` and
/// upwind treatment `G`.
#[derive(Debug, Clone)]
pub struct ExposureAssignment {
    pub key: Vec<u8>,
    pub upwind: Vec<u8>,
}

impl ExposureAssignment {
    pub fn len(&self) -> usize {
        self.key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }

    /// Restrict to the given outcome rows (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> ExposureAssignment {
        ExposureAssignment {
            key: rows.iter().map(|&r| self.key[r]).collect(),
            upwind: rows.iter().map(|&r| self.upwind[r]).collect(),
        }
    }
}

/// Map intervention-level treatments to outcome-level `(Z, G)` exposures.
pub fn map_treatments(
    network: &BipartiteNetwork,
    treatments: &[u8],
    mapping: &dyn ExposureMapping,
) -> Result<ExposureAssignment> {
    if treatments.len() != network.n_intervention() {
        return Err(Error::Mapping(format!(
            "treatment defined for {} of {} intervention units",
            treatments.len(),
            network.n_intervention()
        )));
    }
    if treatments.iter().any(|&t| t > 1) {
        return Err(Error::Mapping("treatments must be 0 or 1".into()));
    }
    let key_of = network.key_of()?;
    let upwind_of = network.upwind_of()?;
    let key = key_of.iter().map(|&j| treatments[j]).collect();
    let upwind = upwind_of
        .iter()
        .map(|set| {
            let ts: Vec<u8> = set.iter().map(|&j| treatments[j]).collect();
            mapping.exposure(&ts)
        })
        .collect();
    Ok(ExposureAssignment { key, upwind })
}

/// 2x2 exposure cell counts `n_zg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCounts {
    /// Indexed by [`cell_index`](crate::propensity::cell_index).
    pub counts: [usize; 4],
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn get(&self, z: u8, g: u8) -> usize {
        self.counts[crate::propensity::cell_index(z, g)]
    }
}

/// Count outcome units in each `(Z, G)` cell.
pub fn cell_counts(assignment: &ExposureAssignment) -> CellCounts {
    let mut counts = [0usize; 4];
    for (&z, &g) in assignment.key.iter().zip(&assignment.upwind) {
        counts[crate::propensity::cell_index(z, g)] += 1;
    }
    CellCounts { counts }
}
