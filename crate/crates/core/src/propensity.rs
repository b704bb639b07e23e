//! Intervention-level propensity estimation and the outcome-level joint
//! propensity score.
//!
//! The propensity of each intervention unit is fit by logistic regression on
//! its own covariates plus eta summaries of associated outcome covariates.
//! Mapped to the outcome level under independent assignment, the joint
//! propensity for unit `i` factorizes as
//! `psi_i(z, g) = phi_key(z) * phi_upwind(g)` with `phi(0) = 1 - phi(1)`.
//! Because the product can produce extreme values, component scores and the
//! four joint cells are truncated at configurable quantiles.

use crate::bipartite::BipartiteNetwork;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::regress::{fit_logistic, predict_logistic, quantile, FittedLinearModel};

/// Storage index of exposure cell `(z, g)` in 4-element cell tables.
#[inline]
pub const fn cell_index(z: u8, g: u8) -> usize {
    (z as usize) * 2 + (g as usize)
}

/// The four exposure cells in storage order.
pub const CELLS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Quantile pairs for the two truncation stages. `(0.0, 1.0)` disables a
/// stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    pub component: (f64, f64),
    pub joint: (f64, f64),
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { component: (0.05, 0.95), joint: (0.05, 0.95) }
    }
}

impl TruncationConfig {
    /// No clipping at either stage.
    pub fn identity() -> Self {
        TruncationConfig { component: (0.0, 1.0), joint: (0.0, 1.0) }
    }
}

/// Clip values applied at each truncation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBounds {
    pub key_component: (f64, f64),
    pub upwind_component: (f64, f64),
    /// Per-cell joint bounds, indexed by [`cell_index`].
    pub joint: [(f64, f64); 4],
}

/// Component and joint propensity scores for one analysis dataset.
#[derive(Debug, Clone)]
pub struct PropensityBundle {
    /// Estimated `P(T_j = 1)` per intervention unit.
    pub phi: Vec<f64>,
    /// Per-outcome-unit joint propensity over the four cells, indexed by
    /// [`cell_index`].
    pub psi: Vec<[f64; 4]>,
    pub bounds: TruncationBounds,
}

/// An intervention-level propensity fit plus the scores it implies.
#[derive(Debug, Clone)]
pub struct PropensityFit {
    pub model: FittedLinearModel,
    /// `P(T_j = 1)` for every row of the prediction design.
    pub phi: Vec<f64>,
}

/// Fit the intervention-level propensity model.
///
/// `fit_design` holds the rows used for fitting (all units, or a retained
/// subset during bootstrap); `predict_design` holds the rows scores are
/// needed for. The fitted model object is kept for bootstrap refits.
pub fn fit_intervention_propensity(
    fit_design: &Matrix,
    treatments: &[u8],
    predict_design: &Matrix,
    max_iter: usize,
    tol: f64,
) -> Result<PropensityFit> {
    let y: Vec<f64> = treatments.iter().map(|&t| t as f64).collect();
    let model = fit_logistic(fit_design, &y, max_iter, tol)?;
    let phi = predict_logistic(&model, predict_design)?;
    Ok(PropensityFit { model, phi })
}

/// Clip `scores` at its own nearest-rank quantiles, returning the clipped
/// vector and the bounds applied.
pub fn truncate_scores(scores: &[f64], lower_q: f64, upper_q: f64) -> Result<(Vec<f64>, (f64, f64))> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(Error::Parameter(format!(
            "truncation quantiles ({}, {}) must satisfy 0 <= lower < upper <= 1",
            lower_q, upper_q
        )));
    }
    let lower = quantile(scores, lower_q)?;
    let upper = quantile(scores, upper_q)?;
    Ok((scores.iter().map(|&s| s.clamp(lower, upper)).collect(), (lower, upper)))
}

/// Clip `scores` to externally supplied bounds (used when a bootstrap run is
/// configured to reuse full-data truncation bounds).
pub fn truncate_with_bounds(scores: &[f64], bounds: (f64, f64)) -> Vec<f64> {
    scores.iter().map(|&s| s.clamp(bounds.0, bounds.1)).collect()
}

/// Build joint propensities from per-outcome component scores.
///
/// `key_scores[i]` / `upwind_scores[i]` are `P(T = 1)` for outcome unit
/// `i`'s key-associated and upwind intervention units. Both component
/// vectors are truncated first; the four joint cells are then truncated
/// separately (each cell has its own scale, so bounds are computed per
/// cell across outcome units).
pub fn build_joint_from_components(
    key_scores: &[f64],
    upwind_scores: &[f64],
    config: &TruncationConfig,
) -> Result<(Vec<[f64; 4]>, TruncationBounds)> {
    if key_scores.len() != upwind_scores.len() {
        return Err(Error::Dimension("component score lengths differ".into()));
    }
    if key_scores.is_empty() {
        return Err(Error::Parameter("no outcome units".into()));
    }
    let (key_t, key_bounds) = truncate_scores(key_scores, config.component.0, config.component.1)?;
    let (up_t, upwind_bounds) = truncate_scores(upwind_scores, config.component.0, config.component.1)?;

    let n = key_t.len();
    let mut psi: Vec<[f64; 4]> = Vec::with_capacity(n);
    for i in 0..n {
        let k = key_t[i];
        let u = up_t[i];
        let mut cells = [0.0; 4];
        for &(z, g) in &CELLS {
            let pk = if z == 1 { k } else { 1.0 - k };
            let pu = if g == 1 { u } else { 1.0 - u };
            cells[cell_index(z, g)] = pk * pu;
        }
        psi.push(cells);
    }

    let mut joint_bounds = [(0.0, 1.0); 4];
    for c in 0..4 {
        let column: Vec<f64> = psi.iter().map(|row| row[c]).collect();
        let (clipped, bounds) = truncate_scores(&column, config.joint.0, config.joint.1)?;
        for (row, v) in psi.iter_mut().zip(clipped) {
            row[c] = v;
        }
        joint_bounds[c] = bounds;
    }

    Ok((psi, TruncationBounds { key_component: key_bounds, upwind_component: upwind_bounds, joint: joint_bounds }))
}

/// Build the joint propensity bundle for a derived network from
/// intervention-level scores `phi`.
pub fn build_joint_propensity(
    network: &BipartiteNetwork,
    phi: &[f64],
    config: &TruncationConfig,
) -> Result<PropensityBundle> {
    if phi.len() != network.n_intervention() {
        return Err(Error::Structure(format!(
            "phi has {} entries for {} intervention units",
            phi.len(),
            network.n_intervention()
        )));
    }
    if phi.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Propensity("component scores must lie strictly in (0, 1)".into()));
    }
    let key_of = network.key_of()?;
    let upwind_single = network.single_upwind_of()?;
    let key_scores: Vec<f64> = key_of.iter().map(|&j| phi[j]).collect();
    let upwind_scores: Vec<f64> = upwind_single.iter().map(|&j| phi[j]).collect();
    let (psi, bounds) = build_joint_from_components(&key_scores, &upwind_scores, config)?;
    Ok(PropensityBundle { phi: phi.to_vec(), psi, bounds })
}
