//! Property tests for structural invariants: rank derivations, quantiles,
//! joint propensities, per-unit/population estimator consistency.

use proptest::prelude::*;

use bni_core::bipartite::{
    cell_counts, derive_exposure_structure, filter_low_influence, load_network, ExposureAssignment,
    SecondRanked,
};
use bni_core::discovery::demean;
use bni_core::effects::{effect, iate, Estimand, EstimatorInputs, Method, OutcomePredictions, Subgroup};
use bni_core::linalg::Matrix;
use bni_core::propensity::{build_joint_from_components, truncate_scores, TruncationConfig};
use bni_core::regress::{fit_ols, quantile, Family, FittedLinearModel};
use bni_core::table::{Frame, UnitTable};

fn dummy_model() -> FittedLinearModel {
    FittedLinearModel {
        coefficients: vec![0.0],
        family: Family::Gaussian,
        converged: true,
        iterations: 1,
        coefficient_se: None,
    }
}

/// Random complete bipartite weight grid: j plants x n outcomes.
fn weight_grid(j: usize, n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..100.0, j * n)
}

fn network_from_grid(j: usize, n: usize, weights: &[f64]) -> bni_core::bipartite::BipartiteNetwork {
    let mut triplets = Vec::new();
    for a in 0..j {
        for b in 0..n {
            triplets.push((format!("p{}", a), format!("o{}", b), weights[a * n + b]));
        }
    }
    let mut net = load_network(&triplets).unwrap();
    derive_exposure_structure(&mut net, &SecondRanked).unwrap();
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Scaling all weights by a positive constant never changes the derived
    /// key/upwind structure.
    #[test]
    fn derivation_is_scale_invariant(
        weights in weight_grid(4, 6),
        scale in 0.001f64..1000.0,
    ) {
        let base = network_from_grid(4, 6, &weights);
        let scaled_weights: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let scaled = network_from_grid(4, 6, &scaled_weights);
        prop_assert_eq!(base.key_of().unwrap(), scaled.key_of().unwrap());
        prop_assert_eq!(base.upwind_of().unwrap(), scaled.upwind_of().unwrap());
    }

    /// The key-associated unit is never in the upwind set.
    #[test]
    fn key_disjoint_from_upwind(weights in weight_grid(5, 8)) {
        let net = network_from_grid(5, 8, &weights);
        for (i, &k) in net.key_of().unwrap().iter().enumerate() {
            prop_assert!(!net.upwind_of().unwrap()[i].contains(&k));
        }
    }

    /// Filtering at q = 0 keeps every outcome unit.
    #[test]
    fn filter_at_zero_is_identity(weights in weight_grid(4, 7)) {
        let net = network_from_grid(4, 7, &weights);
        let table = UnitTable::new((0..7).map(|i| format!("o{}", i)).collect(), Frame::new()).unwrap();
        let (filtered, _) = filter_low_influence(&net, &table, 0.0).unwrap();
        prop_assert_eq!(filtered.n_outcome(), 7);
        prop_assert_eq!(filtered.entries().len(), net.entries().len());
    }

    /// Nearest-rank quantiles are monotone in p and equivariant under
    /// strictly increasing transforms.
    #[test]
    fn quantile_monotone_and_equivariant(
        values in proptest::collection::vec(-50.0f64..50.0, 1..40),
        p1 in 0.0f64..1.0,
        p2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(quantile(&values, lo).unwrap() <= quantile(&values, hi).unwrap());

        let transformed: Vec<f64> = values.iter().map(|v| (0.1 * v).exp()).collect();
        let q = quantile(&values, lo).unwrap();
        let qt = quantile(&transformed, lo).unwrap();
        prop_assert!((qt - (0.1 * q).exp()).abs() < 1e-12);
    }

    /// With identity truncation the four joint cells sum to one and every
    /// cell is strictly positive.
    #[test]
    fn joint_cells_sum_to_one(
        key in proptest::collection::vec(0.01f64..0.99, 1..50),
        upwind_seed in proptest::collection::vec(0.01f64..0.99, 50),
    ) {
        let upwind = &upwind_seed[..key.len()];
        let (psi, _) = build_joint_from_components(&key, upwind, &TruncationConfig::identity()).unwrap();
        for row in &psi {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&c| c > 0.0));
        }
    }

    /// Tightening truncation quantiles weakly shrinks the value range.
    #[test]
    fn truncation_shrinks_range(
        scores in proptest::collection::vec(0.0f64..1.0, 3..60),
        inner in 0.01f64..0.49,
    ) {
        let (wide, _) = truncate_scores(&scores, 0.0, 1.0).unwrap();
        let (narrow, _) = truncate_scores(&scores, inner, 1.0 - inner).unwrap();
        let range = |v: &[f64]| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        prop_assert!(range(&narrow) <= range(&wide) + 1e-12);
    }

    /// Demeaned vectors average to zero.
    #[test]
    fn demean_centers(values in proptest::collection::vec(-1e4f64..1e4, 1..100)) {
        let centered = demean(&values).unwrap();
        let mean = centered.iter().sum::<f64>() / centered.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }

    /// Exposure cell counts always sum to the number of outcome units.
    #[test]
    fn cell_counts_total(
        bits in proptest::collection::vec((0u8..2, 0u8..2), 0..60),
    ) {
        let assignment = ExposureAssignment {
            key: bits.iter().map(|b| b.0).collect(),
            upwind: bits.iter().map(|b| b.1).collect(),
        };
        prop_assert_eq!(cell_counts(&assignment).total(), bits.len());
    }

    /// Per-unit pseudo-contrast vectors average exactly to the population
    /// estimate, for every method with occupied cells.
    #[test]
    fn iate_mean_matches_effect(
        ys in proptest::collection::vec(-10.0f64..10.0, 8..24),
        psi_seed in proptest::collection::vec(0.05f64..0.95, 24),
        mu_seed in proptest::collection::vec(-5.0f64..5.0, 96),
    ) {
        let n = ys.len();
        // cycle exposures so all four cells are occupied
        let assignment = ExposureAssignment {
            key: (0..n).map(|i| (i % 2) as u8).collect(),
            upwind: (0..n).map(|i| ((i / 2) % 2) as u8).collect(),
        };
        let psi: Vec<[f64; 4]> = (0..n)
            .map(|i| {
                let v = psi_seed[i % psi_seed.len()];
                [v, 1.0 - v, 0.5 * v + 0.1, 0.9 - 0.5 * v]
            })
            .collect();
        let mu: Vec<[f64; 4]> = (0..n)
            .map(|i| [mu_seed[4 * i % 96], mu_seed[(4 * i + 1) % 96], mu_seed[(4 * i + 2) % 96], mu_seed[(4 * i + 3) % 96]])
            .collect();
        let preds = OutcomePredictions { mu, model: dummy_model() };
        let inputs = EstimatorInputs { y: &ys, assignment: &assignment, psi: &psi, predictions: &preds };
        let sub = Subgroup::all("all", n);
        for method in [Method::GComputation, Method::Aipw, Method::Saipw] {
            for estimand in Estimand::all() {
                let v = iate(&inputs, method, estimand).unwrap();
                let mean = v.iter().sum::<f64>() / n as f64;
                let pop = effect(&inputs, method, estimand, &sub).unwrap().estimate;
                prop_assert!((mean - pop).abs() < 1e-12);
            }
        }
    }

    /// OLS residuals are orthogonal to the design within 1e-9 relative.
    #[test]
    fn ols_residual_orthogonality(
        x1 in proptest::collection::vec(-5.0f64..5.0, 12..40),
        seed in 0u64..1000,
    ) {
        let n = x1.len();
        let x2: Vec<f64> = (0..n).map(|i| ((i as f64) + seed as f64).sin() * 3.0).collect();
        let y: Vec<f64> = (0..n).map(|i| x1[i] - 0.5 * x2[i] + ((i * 7 + seed as usize) % 11) as f64 * 0.3).collect();
        let design = Matrix::from_columns(&[x1, x2]).unwrap();
        let fit = fit_ols(&design, &y).unwrap();
        let scale: f64 = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
        // residual orthogonality: X'(y - X beta) ~ 0
        let mut with_intercept = vec![vec![1.0; n]];
        for c in 0..2 {
            with_intercept.push((0..n).map(|i| design.get(i, c)).collect());
        }
        for col in &with_intercept {
            let mut dot = 0.0;
            for i in 0..n {
                let fitted: f64 = fit.coefficients[0]
                    + fit.coefficients[1] * design.get(i, 0)
                    + fit.coefficients[2] * design.get(i, 1);
                dot += col[i] * (y[i] - fitted);
            }
            prop_assert!(dot.abs() / (scale * n as f64) < 1e-9, "X'r = {}", dot);
        }
    }
}
