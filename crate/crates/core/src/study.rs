//! Analysis pipeline: a derived dataset plus the model configuration,
//! fit end to end.
//!
//! A [`Study`] couples a derived bipartite network with the intervention and
//! outcome unit tables and the frozen eta summaries. [`fit_analysis`] runs
//! the full estimation pipeline (propensity fit, truncation, joint
//! propensity, outcome model) for the whole dataset or for a row subset, so
//! the bootstrap and the simulation harness share one code path.

use crate::bipartite::{
    derive_exposure_structure, map_treatments, summarize_outcome_covariates, BipartiteNetwork,
    EtaRole, EtaSummary, ExposureAssignment, ExposureMapping, SecondRanked,
};
use crate::effects::{
    effect, iate, EffectEstimate, Estimand, EstimatorInputs, Method, OutcomePredictions, Subgroup,
};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::propensity::{
    build_joint_from_components, fit_intervention_propensity, truncate_with_bounds,
    TruncationBounds, TruncationConfig, CELLS,
};
use crate::regress::{FittedLinearModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::table::{Frame, UnitTable};

/// A derived dataset ready for estimation.
#[derive(Debug, Clone)]
pub struct Study {
    pub network: BipartiteNetwork,
    pub intervention: UnitTable,
    pub outcome: UnitTable,
    pub eta_key: EtaSummary,
    pub eta_upwind: EtaSummary,
    pub assignment: ExposureAssignment,
}

/// Reorder `table` rows to match `ids`; every id must be present.
pub fn align_table(table: &UnitTable, ids: &[String], side: &str) -> Result<UnitTable> {
    let index: std::collections::HashMap<&str, usize> =
        table.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        match index.get(id.as_str()) {
            Some(&r) => rows.push(r),
            None => {
                return Err(Error::Format(format!(
                    "{} unit '{}' appears in the network but not in the {} table",
                    side, id, side
                )))
            }
        }
    }
    Ok(table.select_rows(&rows))
}

impl Study {
    /// Assemble a study: derive the exposure structure if needed, align the
    /// unit tables to network order, compute eta summaries, and map the
    /// treatments. The intervention table must carry treatments.
    pub fn build(
        mut network: BipartiteNetwork,
        intervention: UnitTable,
        outcome: UnitTable,
        mapping: &dyn ExposureMapping,
    ) -> Result<Study> {
        if !network.is_derived() {
            derive_exposure_structure(&mut network, mapping)?;
        }
        let intervention = align_table(&intervention, network.intervention_ids(), "intervention")?;
        let outcome = align_table(&outcome, network.outcome_ids(), "outcome")?;
        let treatments = intervention
            .treatment
            .clone()
            .ok_or_else(|| Error::Format("intervention table has no treatment column".into()))?;
        let eta_key = summarize_outcome_covariates(&network, &outcome, EtaRole::Key)?;
        let eta_upwind = summarize_outcome_covariates(&network, &outcome, EtaRole::Upwind)?;
        let assignment = map_treatments(&network, &treatments, mapping)?;
        Ok(Study { network, intervention, outcome, eta_key, eta_upwind, assignment })
    }

    /// Convenience constructor with the built-in second-ranked mapping.
    pub fn build_default(
        network: BipartiteNetwork,
        intervention: UnitTable,
        outcome: UnitTable,
    ) -> Result<Study> {
        Study::build(network, intervention, outcome, &SecondRanked)
    }

    pub fn n_outcome(&self) -> usize {
        self.network.n_outcome()
    }

    pub fn n_intervention(&self) -> usize {
        self.network.n_intervention()
    }

    pub fn treatments(&self) -> &[u8] {
        self.intervention.treatment.as_deref().expect("validated at build")
    }

    pub fn outcome_values(&self) -> Result<&[f64]> {
        self.outcome
            .outcome
            .as_deref()
            .ok_or_else(|| Error::Format("outcome table has no outcome column".into()))
    }

    /// Intervention-level design frame: own covariates plus the (imputed,
    /// full-data) eta summaries under `Key`/`Upwind` prefixes.
    pub fn intervention_frame(&self) -> Result<Frame> {
        let mut frame = self.intervention.covariates.clone();
        frame.extend_from(&self.eta_key.to_frame()?)?;
        frame.extend_from(&self.eta_upwind.to_frame()?)?;
        Ok(frame)
    }

    /// Outcome-level covariate frame: own covariates plus the key-associated
    /// intervention unit's covariates under a `Key` prefix.
    pub fn outcome_covariate_frame(&self) -> Result<Frame> {
        let mut frame = self.outcome.covariates.clone();
        let key_of = self.network.key_of()?;
        for name in self.intervention.covariates.names() {
            let col = self.intervention.covariates.column(name).expect("known column");
            let mapped: Vec<f64> = key_of.iter().map(|&j| col[j]).collect();
            frame.push_column(format!("Key{}", name), mapped)?;
        }
        Ok(frame)
    }
}

/// Model configuration for one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub propensity_formula: Formula,
    pub outcome_formula: Formula,
    pub truncation: TruncationConfig,
    pub methods: Vec<Method>,
    pub estimands: Vec<Estimand>,
    /// Subgroups as masks over the study's outcome units. Estimates are
    /// produced for each entry; include [`Subgroup::all`] for the
    /// population rows.
    pub subgroups: Vec<Subgroup>,
}

/// Everything fit by one pass of the pipeline.
#[derive(Debug, Clone)]
pub struct FittedAnalysis {
    /// Intervention-level scores for every intervention unit.
    pub phi: Vec<f64>,
    pub propensity_model: FittedLinearModel,
    /// Joint propensities for the analyzed outcome rows.
    pub psi: Vec<[f64; 4]>,
    pub bounds: TruncationBounds,
    pub predictions: OutcomePredictions,
    pub assignment: ExposureAssignment,
    pub y: Vec<f64>,
}

impl FittedAnalysis {
    pub fn inputs(&self) -> EstimatorInputs<'_> {
        EstimatorInputs {
            y: &self.y,
            assignment: &self.assignment,
            psi: &self.psi,
            predictions: &self.predictions,
        }
    }

    pub fn estimate(&self, method: Method, estimand: Estimand, subgroup: &Subgroup) -> Result<EffectEstimate> {
        effect(&self.inputs(), method, estimand, subgroup)
    }

    pub fn iate(&self, method: Method, estimand: Estimand) -> Result<Vec<f64>> {
        iate(&self.inputs(), method, estimand)
    }
}

/// Run the estimation pipeline.
///
/// `outcome_rows` selects the analyzed outcome units (duplicates allowed,
/// as in bootstrap resamples); `fit_plants` selects the intervention units
/// the propensity model is fit on (scores are still predicted for all).
/// `bounds_override` clips with previously computed truncation bounds
/// instead of recomputing them from the analyzed rows.
pub fn fit_analysis(
    study: &Study,
    config: &AnalysisConfig,
    outcome_rows: Option<&[usize]>,
    fit_plants: Option<&[usize]>,
    bounds_override: Option<&TruncationBounds>,
) -> Result<FittedAnalysis> {
    let intervention_frame = study.intervention_frame()?;
    let design_all = config.propensity_formula.design(&intervention_frame)?;
    let treatments = study.treatments();

    let (fit_design, fit_t): (_, Vec<u8>) = match fit_plants {
        Some(rows) => (design_all.select_rows(rows), rows.iter().map(|&r| treatments[r]).collect()),
        None => (design_all.clone(), treatments.to_vec()),
    };
    let prop_fit = fit_intervention_propensity(&fit_design, &fit_t, &design_all, DEFAULT_MAX_ITER, DEFAULT_TOL)?;

    let key_of = study.network.key_of()?;
    let upwind_of = study.network.single_upwind_of()?;
    let all_rows: Vec<usize>;
    let rows: &[usize] = match outcome_rows {
        Some(r) => r,
        None => {
            all_rows = (0..study.n_outcome()).collect();
            &all_rows
        }
    };

    let key_scores: Vec<f64> = rows.iter().map(|&i| prop_fit.phi[key_of[i]]).collect();
    let upwind_scores: Vec<f64> = rows.iter().map(|&i| prop_fit.phi[upwind_of[i]]).collect();
    let (psi, bounds) = match bounds_override {
        None => build_joint_from_components(&key_scores, &upwind_scores, &config.truncation)?,
        Some(fixed) => {
            let key_t = truncate_with_bounds(&key_scores, fixed.key_component);
            let up_t = truncate_with_bounds(&upwind_scores, fixed.upwind_component);
            let mut psi: Vec<[f64; 4]> = Vec::with_capacity(rows.len());
            for (k, u) in key_t.iter().zip(&up_t) {
                let mut cells = [0.0; 4];
                for &(z, g) in &CELLS {
                    let pk = if z == 1 { *k } else { 1.0 - k };
                    let pu = if g == 1 { *u } else { 1.0 - u };
                    let idx = crate::propensity::cell_index(z, g);
                    cells[idx] = (pk * pu).clamp(fixed.joint[idx].0, fixed.joint[idx].1);
                }
                psi.push(cells);
            }
            (psi, *fixed)
        }
    };

    let assignment = study.assignment.select_rows(rows);
    let y_all = study.outcome_values()?;
    let y: Vec<f64> = rows.iter().map(|&i| y_all[i]).collect();

    let covariates = study.outcome_covariate_frame()?.select_rows(rows);
    let frame = crate::effects::outcome_frame_with_exposures(&covariates, &assignment)?;
    let predictions = crate::effects::fit_outcome_model(&frame, &y, &config.outcome_formula)?;

    Ok(FittedAnalysis {
        phi: prop_fit.phi,
        propensity_model: prop_fit.model,
        psi,
        bounds,
        predictions,
        assignment,
        y,
    })
}

/// Restrict study-level subgroups to the analyzed rows.
pub fn localize_subgroups(subgroups: &[Subgroup], rows: &[usize]) -> Vec<Subgroup> {
    subgroups
        .iter()
        .map(|s| Subgroup {
            name: s.name.clone(),
            mask: rows.iter().map(|&r| s.mask[r]).collect(),
        })
        .collect()
}

/// Fit the pipeline and produce every configured estimate.
pub fn compute_estimates(
    study: &Study,
    config: &AnalysisConfig,
    outcome_rows: Option<&[usize]>,
    fit_plants: Option<&[usize]>,
    bounds_override: Option<&TruncationBounds>,
) -> Result<Vec<EffectEstimate>> {
    let fitted = fit_analysis(study, config, outcome_rows, fit_plants, bounds_override)?;
    let local = match outcome_rows {
        Some(rows) => localize_subgroups(&config.subgroups, rows),
        None => config.subgroups.clone(),
    };
    let mut out = Vec::with_capacity(config.estimands.len() * config.methods.len() * local.len());
    for &estimand in &config.estimands {
        for &method in &config.methods {
            for subgroup in &local {
                out.push(fitted.estimate(method, estimand, subgroup)?);
            }
        }
    }
    Ok(out)
}
