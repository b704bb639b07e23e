//! Empirical Monte Carlo harness: synthetic interference structures,
//! treatment/outcome generating models with planted effect heterogeneity,
//! misspecification scenarios, and scenario drivers.
//!
//! A scenario fixes the interference structure, covariates, treatments, and
//! propensity scores once; only outcomes are regenerated across Monte Carlo
//! replications. Estimator quality is recorded as percent absolute bias
//! (AB) of each planted subgroup's direct and spillover effect, normalized
//! by the population average effect `xi`.
//!
//! Four misspecification scenarios control which nuisance models are fit
//! correctly:
//!
//! - A: propensity and outcome models both correct
//! - B: propensity misspecified (linear terms only), outcome correct
//! - C: propensity correct, outcome misspecified (no interaction terms)
//! - D: both misspecified

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;

use crate::bipartite::{
    cell_counts, derive_exposure_structure, filter_low_influence, map_treatments,
    summarize_outcome_covariates, BipartiteNetwork, CellCounts, EtaRole, ExposureAssignment,
    SecondRanked,
};
use crate::effects::{percent_absolute_bias, Estimand, EstimatorInputs, Method, Subgroup};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::propensity::{build_joint_from_components, cell_index, fit_intervention_propensity, TruncationConfig};
use crate::regress::{quantile, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::stream_rng;
use crate::table::{Frame, UnitTable};

/// Misspecification scenario labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Misspec {
    A,
    B,
    C,
    D,
}

impl Misspec {
    pub fn label(self) -> &'static str {
        match self {
            Misspec::A => "A",
            Misspec::B => "B",
            Misspec::C => "C",
            Misspec::D => "D",
        }
    }

    pub fn parse(text: &str) -> Result<Misspec> {
        match text.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Misspec::A),
            "B" => Ok(Misspec::B),
            "C" => Ok(Misspec::C),
            "D" => Ok(Misspec::D),
            other => Err(Error::Config(format!("unknown scenario '{}'", other))),
        }
    }

    pub fn propensity_correct(self) -> bool {
        matches!(self, Misspec::A | Misspec::C)
    }

    pub fn outcome_correct(self) -> bool {
        matches!(self, Misspec::A | Misspec::B)
    }

    pub fn all() -> [Misspec; 4] {
        [Misspec::A, Misspec::B, Misspec::C, Misspec::D]
    }
}

/// Geometry of the synthetic interference structure.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n_intervention: usize,
    pub n_outcome: usize,
    /// Exponential decay rate of influence with distance in the unit square.
    pub decay: f64,
    /// Standard deviation of the multiplicative log-normal weight noise.
    pub weight_noise_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n_intervention: 40, n_outcome: 3000, decay: 5.0, weight_noise_sd: 0.5 }
    }
}

/// One Monte Carlo condition.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub misspec: Misspec,
    /// Fraction of the (filtered) outcome population analyzed.
    pub sample_proportion: f64,
    /// Outcome model error variance.
    pub sigma2: f64,
    /// Population average effect; also the AB normalizer.
    pub xi: f64,
    pub replications: usize,
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    /// Drop outcome units with key weights below this quantile before
    /// analysis; `None` disables the filter.
    pub filter_quantile: Option<f64>,
    pub truncation: TruncationConfig,
}

impl SimScenario {
    pub fn new(misspec: Misspec, seed: u64) -> Self {
        SimScenario {
            misspec,
            sample_proportion: 1.0,
            sigma2: 1.0,
            xi: 1.0,
            replications: 1000,
            seed,
            synthetic: SyntheticConfig::default(),
            filter_quantile: Some(0.25),
            truncation: TruncationConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_proportion > 0.0 && self.sample_proportion <= 1.0) {
            return Err(Error::Parameter(format!(
                "sample proportion {} outside (0, 1]",
                self.sample_proportion
            )));
        }
        if self.sigma2 <= 0.0 {
            return Err(Error::Parameter(format!("sigma2 {} must be positive", self.sigma2)));
        }
        if !self.xi.is_finite() || self.xi == 0.0 {
            return Err(Error::Parameter("xi must be a nonzero finite real".into()));
        }
        if self.replications == 0 {
            return Err(Error::Parameter("replications must be at least 1".into()));
        }
        if self.synthetic.n_intervention < 2 || self.synthetic.n_outcome < 2 {
            return Err(Error::Parameter("synthetic network needs at least 2 units per side".into()));
        }
        Ok(())
    }
}

/// Truncated-normal draw by rejection.
fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let dist = Normal::new(mean, sd).expect("valid normal");
    loop {
        let v = dist.sample(rng);
        if v >= lo && v <= hi {
            return v;
        }
    }
}

/// Synthetic network and covariates.
///
/// Units are placed uniformly in the unit square; the influence of
/// intervention unit `j` on outcome unit `i` is `exp(-decay * distance)`
/// with multiplicative log-normal noise, so every weight is positive.
/// Covariate distributions match the documented names and ranges of the
/// application data (population logs, smoking rate, urbanicity, poverty,
/// nonwhite proportion at the outcome level; log operating time at the
/// intervention level).
pub fn generate_synthetic_network(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<(BipartiteNetwork, UnitTable, UnitTable)> {
    if config.n_intervention < 2 || config.n_outcome < 2 {
        return Err(Error::Parameter("need at least 2 units on each side".into()));
    }
    if config.decay < 0.0 || !config.decay.is_finite() {
        return Err(Error::Parameter(format!("decay {} must be finite and nonnegative", config.decay)));
    }
    let mut rng = stream_rng(seed, 0);
    let j_count = config.n_intervention;
    let n = config.n_outcome;

    let plant_pos: Vec<(f64, f64)> = (0..j_count).map(|_| (rng.gen(), rng.gen())).collect();
    let zip_pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();

    let noise = Normal::new(0.0, config.weight_noise_sd.max(0.0)).expect("valid normal");
    let mut triplets = Vec::with_capacity(j_count * n);
    for (j, &(px, py)) in plant_pos.iter().enumerate() {
        for (i, &(zx, zy)) in zip_pos.iter().enumerate() {
            let dist = ((px - zx).powi(2) + (py - zy).powi(2)).sqrt();
            let w = (-config.decay * dist).exp() * noise.sample(&mut rng).exp();
            triplets.push((format!("P{:04}", j + 1), format!("Z{:06}", i + 1), w));
        }
    }
    let network = crate::bipartite::load_network(&triplets)?;

    // intervention covariates
    let mut icov = Frame::new();
    icov.push_column(
        "LogOpTime",
        (0..j_count).map(|_| truncated_normal(&mut rng, 7.75, 0.6, 5.46, 8.93)).collect::<Vec<_>>(),
    )?;
    let intervention = UnitTable::new((1..=j_count).map(|j| format!("P{:04}", j)).collect(), icov)?;

    // outcome covariates
    let beta = |a: f64, b: f64| Beta::new(a, b).expect("valid beta");
    let smoke = beta(4.0, 4.0);
    let highschool = beta(3.5, 6.5);
    let urban = beta(0.9, 1.3);
    let poor = beta(1.8, 13.2);
    let nonwhite = beta(0.8, 6.5);
    let mut ocov = Frame::new();
    ocov.push_column(
        "LogPop",
        (0..n).map(|_| truncated_normal(&mut rng, 8.3, 1.2, 1.39, 11.65)).collect::<Vec<_>>(),
    )?;
    ocov.push_column("SmokeRate", (0..n).map(|_| 0.10 + 0.33 * smoke.sample(&mut rng)).collect::<Vec<_>>())?;
    ocov.push_column("PctHighSchool", (0..n).map(|_| highschool.sample(&mut rng)).collect::<Vec<_>>())?;
    ocov.push_column("PctUrban", (0..n).map(|_| urban.sample(&mut rng)).collect::<Vec<_>>())?;
    ocov.push_column("PctPoor", (0..n).map(|_| poor.sample(&mut rng)).collect::<Vec<_>>())?;
    ocov.push_column("PctNonwhite", (0..n).map(|_| nonwhite.sample(&mut rng)).collect::<Vec<_>>())?;
    let outcome = UnitTable::new((1..=n).map(|i| format!("Z{:06}", i)).collect(), ocov)?;

    Ok((network, intervention, outcome))
}

/// Treatment assignment over intervention units:
/// `logit p_j = 0.1*KeyLogPop_j - 1.5*KeyLogPop_j*KeyPctUrban_j + 0.05*LogOpTime_j^2`.
pub fn generate_treatments(intervention_frame: &Frame, seed: u64) -> Result<(Vec<u8>, Vec<f64>)> {
    let key_logpop = intervention_frame
        .column("KeyLogPop")
        .ok_or_else(|| Error::Format("missing column 'KeyLogPop'".into()))?;
    let key_pcturban = intervention_frame
        .column("KeyPctUrban")
        .ok_or_else(|| Error::Format("missing column 'KeyPctUrban'".into()))?;
    let log_op_time = intervention_frame
        .column("LogOpTime")
        .ok_or_else(|| Error::Format("missing column 'LogOpTime'".into()))?;

    let mut rng = stream_rng(seed, 1);
    let mut treatments = Vec::with_capacity(key_logpop.len());
    let mut probabilities = Vec::with_capacity(key_logpop.len());
    for ((&lp, &pu), &lot) in key_logpop.iter().zip(key_pcturban).zip(log_op_time) {
        let logit = 0.1 * lp - 1.5 * lp * pu + 0.05 * lot * lot;
        let p = 1.0 / (1.0 + (-logit).exp());
        probabilities.push(p);
        treatments.push(u8::from(rng.gen::<f64>() < p));
    }
    Ok((treatments, probabilities))
}

/// True per-unit effects planted on the outcome population.
#[derive(Debug, Clone)]
pub struct PlantedEffects {
    /// Per-unit direct effect (0, xi, or 2*xi).
    pub tau: Vec<f64>,
    /// Per-unit spillover effect (equal to `tau` by construction).
    pub delta: Vec<f64>,
    /// Subgroup index per unit: 0 = zero effect, 1 = xi, 2 = 2*xi.
    pub group: Vec<u8>,
    /// (33rd-percentile nonwhite threshold, median poverty threshold).
    pub thresholds: (f64, f64),
}

pub const PLANTED_GROUP_NAMES: [&str; 3] = ["low", "mid", "high"];

impl PlantedEffects {
    /// The planted subgroups as unit masks, in `low`, `mid`, `high` order.
    pub fn subgroups(&self) -> Vec<Subgroup> {
        (0..3u8)
            .map(|g| Subgroup {
                name: PLANTED_GROUP_NAMES[g as usize].to_string(),
                mask: self.group.iter().map(|&v| v == g).collect(),
            })
            .collect()
    }

    /// True effect of planted group `g` (identical for direct/spillover).
    pub fn group_effect(&self, g: u8, xi: f64) -> f64 {
        match g {
            0 => 0.0,
            1 => xi,
            _ => 2.0 * xi,
        }
    }

    /// 0/1 indicator columns for the mid and high effect groups, used by the
    /// correctly specified outcome model.
    pub fn indicator_frame(&self) -> Result<Frame> {
        let mut f = Frame::new();
        f.push_column("SubgroupMid", self.group.iter().map(|&g| f64::from(g == 1)).collect::<Vec<_>>())?;
        f.push_column("SubgroupHigh", self.group.iter().map(|&g| f64::from(g == 2)).collect::<Vec<_>>())?;
        Ok(f)
    }
}

/// Partition the population into three effect subgroups keyed to nonwhite
/// and poverty covariates:
/// `2*xi` where nonwhite exceeds its 33rd percentile and poverty its median,
/// `xi` where nonwhite exceeds the percentile but poverty does not,
/// `0` where nonwhite does not exceed the percentile.
/// Boundary values (equal to a threshold) fall on the non-exceeding side.
pub fn plant_heterogeneity(outcome_covariates: &Frame, xi: f64) -> Result<PlantedEffects> {
    let nonwhite = outcome_covariates
        .column("PctNonwhite")
        .ok_or_else(|| Error::Format("missing column 'PctNonwhite'".into()))?;
    let poor = outcome_covariates
        .column("PctPoor")
        .ok_or_else(|| Error::Format("missing column 'PctPoor'".into()))?;
    let p33 = quantile(nonwhite, 0.33)?;
    let median = quantile(poor, 0.5)?;

    let mut tau = Vec::with_capacity(nonwhite.len());
    let mut group = Vec::with_capacity(nonwhite.len());
    for (&nw, &pp) in nonwhite.iter().zip(poor) {
        let g = if nw > p33 {
            if pp > median {
                2
            } else {
                1
            }
        } else {
            0
        };
        group.push(g);
        tau.push(match g {
            0 => 0.0,
            1 => xi,
            _ => 2.0 * xi,
        });
    }
    Ok(PlantedEffects { delta: tau.clone(), tau, group, thresholds: (p33, median) })
}

/// Noise-free conditional mean of the outcome generating model at `(z, g)`.
fn outcome_mean(
    logpop: f64,
    smoke: f64,
    poor: f64,
    nonwhite: f64,
    tau: f64,
    delta: f64,
    z: f64,
    g: f64,
) -> f64 {
    2.0 * logpop + 5.0 * smoke + 5.0 * poor + 10.0 * nonwhite + 5.0 * nonwhite * smoke
        + tau * z
        + delta * g
}

/// Draw one replication of potential outcomes.
///
/// A single noise draw per unit is shared across the four `(z, g)` cells, so
/// per-unit contrasts are exactly the planted effects; the observed outcome
/// is the potential outcome at the realized exposures.
pub fn generate_outcomes<R: Rng>(
    outcome_covariates: &Frame,
    planted: &PlantedEffects,
    assignment: &ExposureAssignment,
    sigma2: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<[f64; 4]>)> {
    if sigma2 <= 0.0 {
        return Err(Error::Parameter(format!("sigma2 {} must be positive", sigma2)));
    }
    let logpop = outcome_covariates
        .column("LogPop")
        .ok_or_else(|| Error::Format("missing column 'LogPop'".into()))?;
    let smoke = outcome_covariates
        .column("SmokeRate")
        .ok_or_else(|| Error::Format("missing column 'SmokeRate'".into()))?;
    let poor = outcome_covariates
        .column("PctPoor")
        .ok_or_else(|| Error::Format("missing column 'PctPoor'".into()))?;
    let nonwhite = outcome_covariates
        .column("PctNonwhite")
        .ok_or_else(|| Error::Format("missing column 'PctNonwhite'".into()))?;
    let n = logpop.len();
    if planted.tau.len() != n || assignment.len() != n {
        return Err(Error::Dimension("planted effects / assignment / covariate size mismatch".into()));
    }

    let noise = Normal::new(0.0, sigma2.sqrt()).expect("valid normal");
    let mut potential = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    for i in 0..n {
        let eps = noise.sample(rng);
        let mut cells = [0.0; 4];
        for &(z, g) in &crate::propensity::CELLS {
            cells[cell_index(z, g)] = outcome_mean(
                logpop[i],
                smoke[i],
                poor[i],
                nonwhite[i],
                planted.tau[i],
                planted.delta[i],
                z as f64,
                g as f64,
            ) + eps;
        }
        observed.push(cells[cell_index(assignment.key[i], assignment.upwind[i])]);
        potential.push(cells);
    }
    Ok((observed, potential))
}

/// Propensity formula for the scenario: the correct model carries the
/// interaction and quadratic terms of the treatment generator; the
/// misspecified model uses the same covariates with linear terms only.
pub fn propensity_formula(misspec: Misspec) -> Formula {
    if misspec.propensity_correct() {
        Formula::parse("KeyLogPop + KeyLogPop:KeyPctUrban + LogOpTime^2").expect("static formula")
    } else {
        Formula::parse("KeyLogPop + KeyPctUrban + LogOpTime").expect("static formula")
    }
}

/// Outcome formula for the scenario: the correct model spans the generating
/// mean, including the covariate interaction and the subgroup-effect
/// interactions; the misspecified model drops every interaction term.
pub fn outcome_formula(misspec: Misspec) -> Formula {
    if misspec.outcome_correct() {
        Formula::parse(
            "LogPop + SmokeRate + PctHighSchool + PctUrban + PctPoor + PctNonwhite \
             + PctNonwhite:SmokeRate + Z + G \
             + Z:SubgroupMid + Z:SubgroupHigh + G:SubgroupMid + G:SubgroupHigh",
        )
        .expect("static formula")
    } else {
        Formula::parse("LogPop + SmokeRate + PctHighSchool + PctUrban + PctPoor + PctNonwhite + Z + G")
            .expect("static formula")
    }
}

/// One AB record.
#[derive(Debug, Clone)]
pub struct AbRow {
    pub replicate: usize,
    pub subgroup: String,
    pub estimand: Estimand,
    pub method: Method,
    pub ab: f64,
}

/// Scenario output: raw AB rows plus run diagnostics.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub rows: Vec<AbRow>,
    /// Human-readable notes for replicate-level estimation failures.
    pub failures: Vec<String>,
    pub n_analyzed: usize,
    pub cells: CellCounts,
    pub treated_fraction: f64,
}

impl ScenarioOutput {
    /// Median AB over rows matching an estimand kind and method.
    pub fn median_ab(&self, direct: bool, method: Method) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| matches!(r.estimand, Estimand::Direct { .. }) == direct && r.method == method)
            .map(|r| r.ab)
            .collect();
        quantile(&values, 0.5).ok()
    }
}

/// Draw a simple random sample without replacement of `k` of `n` indices.
fn sample_without_replacement<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    // partial Fisher-Yates
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

/// Run one Monte Carlo scenario.
///
/// The interference structure, covariates, treatments, and propensities are
/// generated once; replications redraw outcomes only and re-apply the three
/// estimators to each planted subgroup.
pub fn run_scenario(scenario: &SimScenario) -> Result<ScenarioOutput> {
    scenario.validate()?;
    let (network, intervention, outcome) = generate_synthetic_network(&scenario.synthetic, scenario.seed)?;
    run_scenario_on(scenario, network, intervention, outcome)
}

/// Run a scenario on a provided interference structure and covariate tables
/// (the tables must carry the generator covariate columns).
pub fn run_scenario_on(
    scenario: &SimScenario,
    mut network: BipartiteNetwork,
    intervention: UnitTable,
    mut outcome: UnitTable,
) -> Result<ScenarioOutput> {
    scenario.validate()?;
    if !network.is_derived() {
        derive_exposure_structure(&mut network, &SecondRanked)?;
    }
    let intervention = {
        // align to network order as in Study::build
        let index: std::collections::HashMap<&str, usize> =
            intervention.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows: Result<Vec<usize>> = network
            .intervention_ids()
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Format(format!("intervention '{}' missing from table", id)))
            })
            .collect();
        intervention.select_rows(&rows?)
    };

    if let Some(q) = scenario.filter_quantile {
        let (fnet, ftab) = filter_low_influence(&network, &outcome, q)?;
        network = fnet;
        outcome = ftab;
    }
    let n_population = network.n_outcome();

    // eta summaries over the full (filtered) population; frozen thereafter
    let eta_key = summarize_outcome_covariates(&network, &outcome, EtaRole::Key)?;
    let eta_upwind = summarize_outcome_covariates(&network, &outcome, EtaRole::Upwind)?;
    let mut intervention_frame = intervention.covariates.clone();
    intervention_frame.extend_from(&eta_key.to_frame()?)?;
    intervention_frame.extend_from(&eta_upwind.to_frame()?)?;

    let (treatments, _true_p) = generate_treatments(&intervention_frame, scenario.seed)?;
    let treated_fraction =
        treatments.iter().map(|&t| t as f64).sum::<f64>() / treatments.len() as f64;

    let planted = plant_heterogeneity(&outcome.covariates, scenario.xi)?;
    let mut outcome_frame_base = outcome.covariates.clone();
    outcome_frame_base.extend_from(&planted.indicator_frame()?)?;

    let assignment_all = map_treatments(&network, &treatments, &SecondRanked)?;

    // analysis sample (drawn once; outcome noise varies per replication)
    let analyzed: Vec<usize> = if scenario.sample_proportion < 1.0 {
        let k = ((scenario.sample_proportion * n_population as f64).round() as usize).max(2);
        let mut rng = stream_rng(scenario.seed, 2);
        sample_without_replacement(&mut rng, n_population, k.min(n_population))
    } else {
        (0..n_population).collect()
    };

    // intervention units serving key/upwind roles for the analyzed sample
    let key_of = network.key_of()?;
    let upwind_of = network.upwind_of()?;
    let mut plant_flag = vec![false; network.n_intervention()];
    for &i in &analyzed {
        plant_flag[key_of[i]] = true;
        for &j in &upwind_of[i] {
            plant_flag[j] = true;
        }
    }
    let retained_plants: Vec<usize> =
        plant_flag.iter().enumerate().filter_map(|(j, &f)| f.then_some(j)).collect();

    // propensity scores, fit once on the retained plants
    let prop_formula = propensity_formula(scenario.misspec);
    let design_all = prop_formula.design(&intervention_frame)?;
    let fit_design = design_all.select_rows(&retained_plants);
    let fit_t: Vec<u8> = retained_plants.iter().map(|&j| treatments[j]).collect();
    let prop_fit =
        fit_intervention_propensity(&fit_design, &fit_t, &design_all, DEFAULT_MAX_ITER, DEFAULT_TOL)?;

    let single_upwind = network.single_upwind_of()?;
    let key_scores: Vec<f64> = analyzed.iter().map(|&i| prop_fit.phi[key_of[i]]).collect();
    let upwind_scores: Vec<f64> = analyzed.iter().map(|&i| prop_fit.phi[single_upwind[i]]).collect();
    let (psi, _bounds) = build_joint_from_components(&key_scores, &upwind_scores, &scenario.truncation)?;

    let assignment = assignment_all.select_rows(&analyzed);
    let cells = cell_counts(&assignment);
    let covariate_rows = outcome_frame_base.select_rows(&analyzed);
    let out_formula = outcome_formula(scenario.misspec);
    let subgroups_local: Vec<Subgroup> = planted
        .subgroups()
        .iter()
        .map(|s| Subgroup { name: s.name.clone(), mask: analyzed.iter().map(|&r| s.mask[r]).collect() })
        .collect();
    let planted_local_tau: Vec<f64> = (0..3u8).map(|g| planted.group_effect(g, scenario.xi)).collect();

    // Monte Carlo replications: outcomes only
    let results: Vec<(Vec<AbRow>, Vec<String>)> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let mut rng = stream_rng(scenario.seed, 1000 + rep as u64);
            let analyzed_planted = PlantedEffects {
                tau: analyzed.iter().map(|&i| planted.tau[i]).collect(),
                delta: analyzed.iter().map(|&i| planted.delta[i]).collect(),
                group: analyzed.iter().map(|&i| planted.group[i]).collect(),
                thresholds: planted.thresholds,
            };
            let (y, _potential) = match generate_outcomes(
                &covariate_rows,
                &analyzed_planted,
                &assignment,
                scenario.sigma2,
                &mut rng,
            ) {
                Ok(v) => v,
                Err(e) => {
                    failures.push(format!("replicate {}: {}", rep, e));
                    return (rows, failures);
                }
            };

            let frame = match crate::effects::outcome_frame_with_exposures(&covariate_rows, &assignment) {
                Ok(f) => f,
                Err(e) => {
                    failures.push(format!("replicate {}: {}", rep, e));
                    return (rows, failures);
                }
            };
            let predictions = match crate::effects::fit_outcome_model(&frame, &y, &out_formula) {
                Ok(p) => p,
                Err(e) => {
                    failures.push(format!("replicate {}: outcome fit: {}", rep, e));
                    return (rows, failures);
                }
            };
            let inputs = EstimatorInputs { y: &y, assignment: &assignment, psi: &psi, predictions: &predictions };

            for estimand in Estimand::all() {
                for method in [Method::GComputation, Method::Aipw, Method::Saipw] {
                    for (g, subgroup) in subgroups_local.iter().enumerate() {
                        match crate::effects::effect(&inputs, method, estimand, subgroup) {
                            Ok(est) => {
                                let truth = planted_local_tau[g];
                                match percent_absolute_bias(est.estimate, truth, scenario.xi) {
                                    Ok(ab) => rows.push(AbRow {
                                        replicate: rep,
                                        subgroup: subgroup.name.clone(),
                                        estimand,
                                        method,
                                        ab,
                                    }),
                                    Err(e) => failures.push(format!("replicate {}: {}", rep, e)),
                                }
                            }
                            Err(e) => failures.push(format!(
                                "replicate {}: {} {:?} {}: {}",
                                rep,
                                method.label(),
                                estimand,
                                subgroup.name,
                                e
                            )),
                        }
                    }
                }
            }
            (rows, failures)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (mut r, mut f) in results {
        rows.append(&mut r);
        failures.append(&mut f);
    }

    Ok(ScenarioOutput { rows, failures, n_analyzed: analyzed.len(), cells, treated_fraction })
}

/// Median and quartiles of pooled AB values, one row per
/// (estimand kind, method) pair, mirroring one boxplot panel.
#[derive(Debug, Clone)]
pub struct AbSummaryRow {
    pub estimand_kind: String,
    pub method: Method,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Summarize scenario output into per-(kind, method) quartiles.
pub fn summarize_ab(rows: &[AbRow]) -> Vec<AbSummaryRow> {
    let mut out = Vec::new();
    for (kind, is_direct) in [("direct", true), ("spillover", false)] {
        for method in [Method::GComputation, Method::Aipw, Method::Saipw] {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    matches!(r.estimand, Estimand::Direct { .. }) == is_direct && r.method == method
                })
                .map(|r| r.ab)
                .collect();
            if values.is_empty() {
                continue;
            }
            out.push(AbSummaryRow {
                estimand_kind: kind.to_string(),
                method,
                count: values.len(),
                median: quantile(&values, 0.5).expect("nonempty"),
                q1: quantile(&values, 0.25).expect("nonempty"),
                q3: quantile(&values, 0.75).expect("nonempty"),
            });
        }
    }
    out
}
