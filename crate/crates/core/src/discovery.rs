//! Data-driven subgroup discovery from per-unit effect estimates.
//!
//! De-meaned IATEs are regressed on median-binarized covariates with the
//! Huber kernel; each coefficient is the estimated additive deviation from
//! the average effect for units above that covariate's median, reported
//! with a normal-approximation 95% CI.

use crate::effects::{Estimand, Method};
use crate::error::{Error, Result};
use crate::linalg::{rank_deficient_pivot, Matrix};
use crate::regress::{fit_huber, quantile, DEFAULT_HUBER_C, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::table::Frame;

/// Median-binarized covariates with their cut values.
#[derive(Debug, Clone)]
pub struct BinarizedCovariates {
    pub names: Vec<String>,
    pub cuts: Vec<f64>,
    /// One 0/1 column per covariate: 1 where the value exceeds the cut.
    pub design: Matrix,
}

/// Binarize each column at its nearest-rank median: 1 where the value is
/// strictly greater. Constant columns are rejected.
pub fn binarize_at_median(covariates: &Frame) -> Result<BinarizedCovariates> {
    if covariates.is_empty() || covariates.nrows() == 0 {
        return Err(Error::Parameter("no covariates to binarize".into()));
    }
    let mut names = Vec::new();
    let mut cuts = Vec::new();
    let mut columns = Vec::new();
    for name in covariates.names() {
        let col = covariates.column(name).expect("known column");
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::DegenerateCovariate(format!(
                "column '{}' is constant and cannot be binarized",
                name
            )));
        }
        let cut = quantile(col, 0.5)?;
        columns.push(col.iter().map(|&v| f64::from(v > cut)).collect::<Vec<f64>>());
        names.push(name.clone());
        cuts.push(cut);
    }
    Ok(BinarizedCovariates { names, cuts, design: Matrix::from_columns(&columns)? })
}

/// Subtract the mean; the result averages to zero.
pub fn demean(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Parameter("demean of empty input".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values.iter().map(|v| v - mean).collect())
}

/// One covariate's estimated deviation from the average effect.
#[derive(Debug, Clone)]
pub struct DiscoveryRow {
    pub covariate: String,
    /// Cut value the covariate was binarized at.
    pub cut: f64,
    pub coefficient: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub significant: bool,
}

/// Joint heterogeneity regression output.
#[derive(Debug, Clone)]
pub struct DiscoveryReport {
    pub estimand: Estimand,
    pub method: Method,
    pub rows: Vec<DiscoveryRow>,
}

/// Regress de-meaned IATEs on all binarized covariates jointly.
///
/// Collinear binarized columns are reported by name. Significance is at the
/// 0.05 level (CI excluding zero).
pub fn discover(
    iates: &[f64],
    binarized: &BinarizedCovariates,
    estimand: Estimand,
    method: Method,
) -> Result<DiscoveryReport> {
    if iates.len() != binarized.design.rows() {
        return Err(Error::Dimension(format!(
            "{} IATEs for {} binarized rows",
            iates.len(),
            binarized.design.rows()
        )));
    }
    let centered = demean(iates)?;
    let fit = fit_huber(&binarized.design, &centered, DEFAULT_HUBER_C, DEFAULT_MAX_ITER, DEFAULT_TOL)
        .map_err(|e| match rank_deficient_pivot(&e) {
            // pivot 0 is the intercept; later pivots map to binarized columns
            Some(0) => Error::Collinearity("intercept".into()),
            Some(k) => Error::Collinearity(binarized.names[k - 1].clone()),
            None => e,
        })?;
    let se = fit
        .coefficient_se
        .as_ref()
        .ok_or_else(|| Error::Collinearity("sandwich variance is singular".into()))?;

    let rows = binarized
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let coef = fit.coefficients[k + 1];
            let half_width = 1.96 * se[k + 1];
            let (lo, hi) = (coef - half_width, coef + half_width);
            DiscoveryRow {
                covariate: name.clone(),
                cut: binarized.cuts[k],
                coefficient: coef,
                ci_lower: lo,
                ci_upper: hi,
                significant: lo > 0.0 || hi < 0.0,
            }
        })
        .collect();

    Ok(DiscoveryReport { estimand, method, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::stream_rng;

    fn tags() -> (Estimand, Method) {
        (Estimand::Direct { held_g: 0 }, Method::Aipw)
    }

    #[test]
    fn binarize_hand_example() {
        let mut f = Frame::new();
        f.push_column("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = binarize_at_median(&f).unwrap();
        assert_eq!(b.cuts, vec![2.0]);
        let col: Vec<f64> = (0..4).map(|i| b.design.get(i, 0)).collect();
        assert_eq!(col, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn binarize_keeps_binary_columns_unchanged() {
        let mut f = Frame::new();
        f.push_column("flag", vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let b = binarize_at_median(&f).unwrap();
        // median of {0,0,0,1,1} is 0; values > 0 stay 1
        assert_eq!(b.cuts, vec![0.0]);
        let col: Vec<f64> = (0..5).map(|i| b.design.get(i, 0)).collect();
        assert_eq!(col, vec![0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn binarize_rejects_constant_column() {
        let mut f = Frame::new();
        f.push_column("c", vec![3.0; 6]).unwrap();
        let err = binarize_at_median(&f).unwrap_err();
        assert!(matches!(err, Error::DegenerateCovariate(_)));
    }

    #[test]
    fn demean_examples() {
        assert_eq!(demean(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(demean(&[4.0; 5]).unwrap(), vec![0.0; 5]);
        assert!(demean(&[]).is_err());

        let mut rng = stream_rng(11, 0);
        let v: Vec<f64> = (0..100).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let d = demean(&v).unwrap();
        let mean: f64 = d.iter().sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn discover_recovers_exact_linear_signal() {
        // IATEs exactly alpha + beta * bin(x): coefficient on x is beta
        let mut rng = stream_rng(11, 1);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mut f = Frame::new();
        f.push_column("x", x).unwrap();
        let b = binarize_at_median(&f).unwrap();
        let beta = 2.5;
        let iates: Vec<f64> = (0..n).map(|i| 0.7 + beta * b.design.get(i, 0)).collect();
        let report = discover(&iates, &b, tags().0, tags().1).unwrap();
        assert!((report.rows[0].coefficient - beta).abs() < 1e-8);
        assert!(report.rows[0].significant);
        assert!(report.rows[0].ci_lower <= report.rows[0].coefficient);
        assert!(report.rows[0].coefficient <= report.rows[0].ci_upper);
    }

    #[test]
    fn discover_constant_iates_gives_zero_coefficients() {
        let mut rng = stream_rng(11, 2);
        let mut f = Frame::new();
        f.push_column("a", (0..50).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        f.push_column("b", (0..50).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let bin = binarize_at_median(&f).unwrap();
        let report = discover(&[3.25; 50], &bin, tags().0, tags().1).unwrap();
        for row in &report.rows {
            assert!(row.coefficient.abs() < 1e-8);
            assert!(!row.significant);
        }
    }

    #[test]
    fn discover_names_collinear_columns() {
        let mut f = Frame::new();
        let base: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        f.push_column("a", base.clone()).unwrap();
        f.push_column("a_copy", base).unwrap();
        let bin = binarize_at_median(&f).unwrap();
        let iates: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let err = discover(&iates, &bin, tags().0, tags().1).unwrap_err();
        match err {
            Error::Collinearity(msg) => assert!(msg.contains("a_copy"), "named '{}'", msg),
            other => panic!("expected collinearity error, got {:?}", other),
        }
    }

    #[test]
    fn demeaning_shifts_only_the_intercept() {
        let mut rng = stream_rng(11, 3);
        let n = 150;
        let mut f = Frame::new();
        f.push_column("u", (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        f.push_column("v", (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let bin = binarize_at_median(&f).unwrap();
        let iates: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.8 * bin.design.get(i, 0) - 0.3 * bin.design.get(i, 1) + 0.01 * rng.gen_range(-1.0..1.0))
            .collect();
        let raw = fit_huber(&bin.design, &iates, DEFAULT_HUBER_C, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let centered = demean(&iates).unwrap();
        let cen = fit_huber(&bin.design, &centered, DEFAULT_HUBER_C, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        for k in 1..raw.coefficients.len() {
            assert!(
                (raw.coefficients[k] - cen.coefficients[k]).abs() < 1e-6,
                "slope {} changed: {} vs {}",
                k,
                raw.coefficients[k],
                cen.coefficients[k]
            );
        }
    }

    #[test]
    fn discovery_is_invariant_to_row_permutation() {
        let mut rng = stream_rng(11, 4);
        let n = 120;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let iates: Vec<f64> = x.iter().map(|&v| 2.0 * f64::from(v > 0.5) + 0.1 * v).collect();
        let mut f = Frame::new();
        f.push_column("x", x.clone()).unwrap();
        let report = discover(&iates, &binarize_at_median(&f).unwrap(), tags().0, tags().1).unwrap();

        // reversed row order
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        let ir: Vec<f64> = iates.iter().rev().copied().collect();
        let mut fr = Frame::new();
        fr.push_column("x", xr).unwrap();
        let report_r = discover(&ir, &binarize_at_median(&fr).unwrap(), tags().0, tags().1).unwrap();
        assert!((report.rows[0].coefficient - report_r.rows[0].coefficient).abs() < 1e-9);
    }
}
