//! Direct and spillover effect estimators: G-computation, augmented inverse
//! propensity weighting (AIPW), and its stabilized variant (SAIPW), each
//! with population, subgroup, and per-unit (IATE) versions.
//!
//! All three estimators average per-unit pseudo-outcomes over the target
//! group:
//!
//! - G-computation uses the outcome-model prediction `mu_i(z, g)` alone.
//! - AIPW adds the inverse-propensity-weighted residual correction
//!   `w_i * Y_i + (1 - w_i) * mu_i` with `w_i = I{Z_i=z, G_i=g} / psi_i`,
//!   which is doubly robust: consistent when either the propensity model or
//!   the outcome model is correct.
//! - SAIPW rescales the weights by the sample mean of `I/psi` (computed over
//!   the full sample even for subgroup estimates), taming extreme joint
//!   propensities.
//!
//! The direct effect `tau(g)` contrasts key-associated treatment levels at a
//! held upwind level; the spillover effect `delta(z)` contrasts upwind
//! levels at a held key-associated level.

use crate::bipartite::ExposureAssignment;
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::linalg::Matrix;
use crate::propensity::cell_index;
use crate::regress::{fit_ols, predict_linear, FittedLinearModel};
use crate::table::Frame;

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GComputation,
    Aipw,
    Saipw,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::GComputation => "G",
            Method::Aipw => "AIPW",
            Method::Saipw => "SAIPW",
        }
    }

    pub fn parse(text: &str) -> Result<Method> {
        match text.trim().to_ascii_uppercase().as_str() {
            "G" | "GCOMP" | "G-COMP" | "GCOMPUTATION" => Ok(Method::GComputation),
            "AIPW" => Ok(Method::Aipw),
            "SAIPW" => Ok(Method::Saipw),
            other => Err(Error::Config(format!("unknown method '{}'", other))),
        }
    }
}

/// Which contrast is estimated, and the level the other exposure is held at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimand {
    /// Direct effect `tau(g)`: contrast in Z at held upwind level `g`.
    Direct { held_g: u8 },
    /// Spillover effect `delta(z)`: contrast in G at held key level `z`.
    Spillover { held_z: u8 },
}

impl Estimand {
    /// The `(high, low)` exposure cells whose means are contrasted.
    pub fn cells(self) -> ((u8, u8), (u8, u8)) {
        match self {
            Estimand::Direct { held_g } => ((1, held_g), (0, held_g)),
            Estimand::Spillover { held_z } => ((held_z, 1), (held_z, 0)),
        }
    }

    pub fn kind_label(self) -> &'static str {
        match self {
            Estimand::Direct { .. } => "direct",
            Estimand::Spillover { .. } => "spillover",
        }
    }

    pub fn held_level(self) -> u8 {
        match self {
            Estimand::Direct { held_g } => held_g,
            Estimand::Spillover { held_z } => held_z,
        }
    }

    /// All four estimands in reporting order.
    pub fn all() -> [Estimand; 4] {
        [
            Estimand::Direct { held_g: 0 },
            Estimand::Direct { held_g: 1 },
            Estimand::Spillover { held_z: 0 },
            Estimand::Spillover { held_z: 1 },
        ]
    }
}

/// A point estimate with its estimand/method/subgroup tags.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub estimand: Estimand,
    pub method: Method,
    /// Conditioning subgroup name; `None` for the full population.
    pub subgroup: Option<String>,
    /// Number of outcome units in the conditioning subgroup.
    pub n_x: usize,
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
}

/// A membership predicate resolved to a unit mask.
#[derive(Debug, Clone)]
pub struct Subgroup {
    pub name: String,
    pub mask: Vec<bool>,
}

impl Subgroup {
    pub fn all(name: impl Into<String>, n: usize) -> Subgroup {
        Subgroup { name: name.into(), mask: vec![true; n] }
    }

    pub fn from_indices(name: impl Into<String>, n: usize, indices: &[usize]) -> Subgroup {
        let mut mask = vec![false; n];
        for &i in indices {
            mask[i] = true;
        }
        Subgroup { name: name.into(), mask }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Comparison operator of a subgroup condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

/// One `column <op> value` clause.
#[derive(Debug, Clone)]
pub struct Condition {
    pub column: String,
    pub comparison: Comparison,
    pub value: f64,
}

/// Conjunction of conditions over a covariate frame.
#[derive(Debug, Clone)]
pub struct Predicate {
    pub conditions: Vec<Condition>,
}

impl Predicate {
    /// Parse `"col>val & col2<=val2"`.
    pub fn parse(text: &str) -> Result<Predicate> {
        let mut conditions = Vec::new();
        for clause in text.split('&') {
            let clause = clause.trim();
            let (op_pos, op_len, comparison) = ["<=", ">=", "<", ">", "="]
                .iter()
                .find_map(|op| {
                    clause.find(op).map(|pos| {
                        let cmp = match *op {
                            "<=" => Comparison::Le,
                            ">=" => Comparison::Ge,
                            "<" => Comparison::Lt,
                            ">" => Comparison::Gt,
                            _ => Comparison::Eq,
                        };
                        (pos, op.len(), cmp)
                    })
                })
                .ok_or_else(|| Error::Config(format!("no comparison operator in '{}'", clause)))?;
            let column = clause[..op_pos].trim().to_string();
            let value: f64 = clause[op_pos + op_len..]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad numeric literal in '{}'", clause)))?;
            if column.is_empty() {
                return Err(Error::Config(format!("missing column name in '{}'", clause)));
            }
            conditions.push(Condition { column, comparison, value });
        }
        Ok(Predicate { conditions })
    }

    /// Resolve membership against a frame.
    pub fn evaluate(&self, frame: &Frame, name: impl Into<String>) -> Result<Subgroup> {
        let mut mask = vec![true; frame.nrows()];
        for cond in &self.conditions {
            let col = frame.column(&cond.column).ok_or_else(|| {
                Error::Format(format!("subgroup predicate references unknown column '{}'", cond.column))
            })?;
            for (m, &v) in mask.iter_mut().zip(col) {
                let keep = match cond.comparison {
                    Comparison::Gt => v > cond.value,
                    Comparison::Ge => v >= cond.value,
                    Comparison::Lt => v < cond.value,
                    Comparison::Le => v <= cond.value,
                    Comparison::Eq => v == cond.value,
                };
                *m = *m && keep;
            }
        }
        Ok(Subgroup { name: name.into(), mask })
    }
}

/// Outcome-model predictions at all four counterfactual exposure cells.
#[derive(Debug, Clone)]
pub struct OutcomePredictions {
    /// `mu[i][cell_index(z, g)]`: predicted outcome for unit `i` with its
    /// observed covariates and exposures toggled to `(z, g)`.
    pub mu: Vec<[f64; 4]>,
    pub model: FittedLinearModel,
}

/// Fit the conditional outcome model by OLS and predict each unit's outcome
/// at the four counterfactual cells.
///
/// `frame` must contain columns named `Z` and `G` holding the observed
/// exposures alongside the covariates; the formula must include both as
/// main-effect terms. Counterfactual prediction toggles only `(Z, G)`,
/// leaving covariates at observed values.
pub fn fit_outcome_model(frame: &Frame, y: &[f64], formula: &Formula) -> Result<OutcomePredictions> {
    if frame.column("Z").is_none() || frame.column("G").is_none() {
        return Err(Error::Format("outcome frame must contain 'Z' and 'G' columns".into()));
    }
    if !formula.has_main_effect("Z") || !formula.has_main_effect("G") {
        return Err(Error::Parameter(
            "outcome formula must include Z and G main-effect terms".into(),
        ));
    }
    if y.len() != frame.nrows() {
        return Err(Error::Dimension(format!(
            "{} outcomes for {} rows",
            y.len(),
            frame.nrows()
        )));
    }
    let design = formula.design(frame)?;
    let model = fit_ols(&design, y)?;

    let n = frame.nrows();
    let mut mu = vec![[0.0; 4]; n];
    let mut cf = frame.clone();
    for &(z, g) in &crate::propensity::CELLS {
        cf.replace_column("Z", vec![z as f64; n])?;
        cf.replace_column("G", vec![g as f64; n])?;
        let cf_design = formula.design(&cf)?;
        let pred = predict_linear(&model, &cf_design)?;
        let idx = cell_index(z, g);
        for (row, v) in mu.iter_mut().zip(pred) {
            row[idx] = v;
        }
    }
    Ok(OutcomePredictions { mu, model })
}

fn subgroup_members(subgroup: &[usize], n: usize) -> Result<&[usize]> {
    if subgroup.is_empty() {
        return Err(Error::Subgroup("empty subgroup".into()));
    }
    if subgroup.iter().any(|&i| i >= n) {
        return Err(Error::Subgroup("subgroup index out of range".into()));
    }
    Ok(subgroup)
}

/// G-computation mean potential outcome: average of `mu_i(z, g)` over the
/// subgroup.
pub fn gcomp_mu(predictions: &OutcomePredictions, z: u8, g: u8, subgroup: &[usize]) -> Result<f64> {
    let members = subgroup_members(subgroup, predictions.mu.len())?;
    let idx = cell_index(z, g);
    Ok(members.iter().map(|&i| predictions.mu[i][idx]).sum::<f64>() / members.len() as f64)
}

#[inline]
fn indicator(assignment: &ExposureAssignment, i: usize, z: u8, g: u8) -> bool {
    assignment.key[i] == z && assignment.upwind[i] == g
}

fn aipw_pseudo(y: f64, observed_in_cell: bool, psi: f64, mu: f64) -> f64 {
    let w = if observed_in_cell { 1.0 / psi } else { 0.0 };
    w * y + (1.0 - w) * mu
}

fn check_psi(psi: f64, i: usize) -> Result<f64> {
    if psi > 0.0 {
        Ok(psi)
    } else {
        Err(Error::Propensity(format!("nonpositive joint propensity {} for unit {}", psi, i)))
    }
}

/// AIPW mean potential outcome for cell `(z, g)` over the subgroup.
pub fn aipw_mu(
    y: &[f64],
    assignment: &ExposureAssignment,
    psi: &[[f64; 4]],
    predictions: &OutcomePredictions,
    z: u8,
    g: u8,
    subgroup: &[usize],
) -> Result<f64> {
    let members = subgroup_members(subgroup, y.len())?;
    let idx = cell_index(z, g);
    let mut sum = 0.0;
    for &i in members {
        let in_cell = indicator(assignment, i, z, g);
        let p = if in_cell { check_psi(psi[i][idx], i)? } else { psi[i][idx] };
        sum += aipw_pseudo(y[i], in_cell, p, predictions.mu[i][idx]);
    }
    Ok(sum / members.len() as f64)
}

/// Normalization factor of the stabilized weights for cell `(z, g)`:
/// the full-sample mean of `I{Z=z, G=g} / psi`.
fn stabilization_factor(
    y_len: usize,
    assignment: &ExposureAssignment,
    psi: &[[f64; 4]],
    z: u8,
    g: u8,
) -> Result<f64> {
    let idx = cell_index(z, g);
    let mut sum = 0.0;
    let mut any = false;
    for i in 0..y_len {
        if indicator(assignment, i, z, g) {
            sum += 1.0 / check_psi(psi[i][idx], i)?;
            any = true;
        }
    }
    if !any {
        return Err(Error::Stabilization(format!(
            "no outcome units observed in cell (z={}, g={})",
            z, g
        )));
    }
    Ok(sum / y_len as f64)
}

/// SAIPW mean potential outcome for cell `(z, g)` over the subgroup. The
/// stabilization factor always sums over the full sample, matching the
/// inner sums of the conditional estimator.
pub fn saipw_mu(
    y: &[f64],
    assignment: &ExposureAssignment,
    psi: &[[f64; 4]],
    predictions: &OutcomePredictions,
    z: u8,
    g: u8,
    subgroup: &[usize],
) -> Result<f64> {
    let members = subgroup_members(subgroup, y.len())?;
    let lambda = stabilization_factor(y.len(), assignment, psi, z, g)?;
    let idx = cell_index(z, g);
    let mut sum = 0.0;
    for &i in members {
        let in_cell = indicator(assignment, i, z, g);
        let w = if in_cell { 1.0 / (check_psi(psi[i][idx], i)? * lambda) } else { 0.0 };
        sum += w * y[i] + (1.0 - w) * predictions.mu[i][idx];
    }
    Ok(sum / members.len() as f64)
}

/// Inputs shared by the estimator entry points.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInputs<'a> {
    pub y: &'a [f64],
    pub assignment: &'a ExposureAssignment,
    pub psi: &'a [[f64; 4]],
    pub predictions: &'a OutcomePredictions,
}

impl<'a> EstimatorInputs<'a> {
    fn mu(&self, method: Method, z: u8, g: u8, subgroup: &[usize]) -> Result<f64> {
        match method {
            Method::GComputation => gcomp_mu(self.predictions, z, g, subgroup),
            Method::Aipw => aipw_mu(self.y, self.assignment, self.psi, self.predictions, z, g, subgroup),
            Method::Saipw => saipw_mu(self.y, self.assignment, self.psi, self.predictions, z, g, subgroup),
        }
    }
}

/// Estimate one effect for one subgroup.
pub fn effect(
    inputs: &EstimatorInputs,
    method: Method,
    estimand: Estimand,
    subgroup: &Subgroup,
) -> Result<EffectEstimate> {
    let members = subgroup.indices();
    let ((z1, g1), (z0, g0)) = estimand.cells();
    let high = inputs.mu(method, z1, g1, &members)?;
    let low = inputs.mu(method, z0, g0, &members)?;
    Ok(EffectEstimate {
        estimand,
        method,
        subgroup: Some(subgroup.name.clone()),
        n_x: members.len(),
        estimate: high - low,
        ci: None,
    })
}

/// Per-unit pseudo-outcome contrasts (IATEs) over the full sample. The mean
/// of the returned vector equals the corresponding population estimate.
pub fn iate(inputs: &EstimatorInputs, method: Method, estimand: Estimand) -> Result<Vec<f64>> {
    let n = inputs.y.len();
    let ((z1, g1), (z0, g0)) = estimand.cells();
    let hi = cell_index(z1, g1);
    let lo = cell_index(z0, g0);

    match method {
        Method::GComputation => Ok((0..n)
            .map(|i| inputs.predictions.mu[i][hi] - inputs.predictions.mu[i][lo])
            .collect()),
        Method::Aipw => (0..n)
            .map(|i| {
                let in_hi = indicator(inputs.assignment, i, z1, g1);
                let in_lo = indicator(inputs.assignment, i, z0, g0);
                let p_hi = if in_hi { check_psi(inputs.psi[i][hi], i)? } else { inputs.psi[i][hi] };
                let p_lo = if in_lo { check_psi(inputs.psi[i][lo], i)? } else { inputs.psi[i][lo] };
                Ok(aipw_pseudo(inputs.y[i], in_hi, p_hi, inputs.predictions.mu[i][hi])
                    - aipw_pseudo(inputs.y[i], in_lo, p_lo, inputs.predictions.mu[i][lo]))
            })
            .collect(),
        Method::Saipw => {
            let lambda_hi = stabilization_factor(n, inputs.assignment, inputs.psi, z1, g1)?;
            let lambda_lo = stabilization_factor(n, inputs.assignment, inputs.psi, z0, g0)?;
            (0..n)
                .map(|i| {
                    let w_hi = if indicator(inputs.assignment, i, z1, g1) {
                        1.0 / (check_psi(inputs.psi[i][hi], i)? * lambda_hi)
                    } else {
                        0.0
                    };
                    let w_lo = if indicator(inputs.assignment, i, z0, g0) {
                        1.0 / (check_psi(inputs.psi[i][lo], i)? * lambda_lo)
                    } else {
                        0.0
                    };
                    Ok((w_hi * inputs.y[i] + (1.0 - w_hi) * inputs.predictions.mu[i][hi])
                        - (w_lo * inputs.y[i] + (1.0 - w_lo) * inputs.predictions.mu[i][lo]))
                })
                .collect()
        }
    }
}

/// Percent absolute bias `|estimate - truth| / |xi| * 100`. The population
/// average effect `xi` normalizes instead of the subgroup truth so the
/// metric stays defined when a subgroup's true effect is zero.
pub fn percent_absolute_bias(estimate: f64, truth: f64, xi: f64) -> Result<f64> {
    if xi == 0.0 {
        return Err(Error::Parameter("percent absolute bias undefined for xi = 0".into()));
    }
    Ok((estimate - truth).abs() / xi.abs() * 100.0)
}

/// Convenience: assemble the outcome frame (covariates plus `Z`/`G`).
pub fn outcome_frame_with_exposures(covariates: &Frame, assignment: &ExposureAssignment) -> Result<Frame> {
    let mut frame = covariates.clone();
    frame.push_column("Z", assignment.key.iter().map(|&v| v as f64).collect())?;
    frame.push_column("G", assignment.upwind.iter().map(|&v| v as f64).collect())?;
    Ok(frame)
}

/// Build a design matrix and verify full-rank fit inputs are consistent.
pub fn design_for(formula: &Formula, frame: &Frame) -> Result<Matrix> {
    formula.design(frame)
}
