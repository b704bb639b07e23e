//! Regression kernels: logistic (IRLS), ordinary least squares, Huber
//! M-estimation, and nearest-rank quantiles.
//!
//! These are the fitting primitives behind propensity models, outcome
//! models, and the heterogeneity regression. Designs are passed without an
//! intercept column; every fit prepends one, so `coefficients[0]` is always
//! the intercept.

use crate::error::{Error, Result};
use crate::linalg::{rank_deficient_pivot, Cholesky, Matrix};

/// Default IRLS tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default IRLS iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;
/// Default Huber tuning constant (95% efficiency at the normal).
pub const DEFAULT_HUBER_C: f64 = 1.345;
/// Coefficient norm beyond which logistic fits are declared separated.
const SEPARATION_NORM: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Logistic,
    Gaussian,
    Huber,
}

/// A fitted linear model. `coefficients[0]` is the intercept.
#[derive(Debug, Clone)]
pub struct FittedLinearModel {
    pub coefficients: Vec<f64>,
    pub family: Family,
    pub converged: bool,
    pub iterations: usize,
    pub coefficient_se: Option<Vec<f64>>,
}

impl FittedLinearModel {
    /// Linear predictor `b0 + x'b` for each row of `design`.
    pub fn linear_predictor(&self, design: &Matrix) -> Result<Vec<f64>> {
        if design.cols() + 1 != self.coefficients.len() {
            return Err(Error::Dimension(format!(
                "design has {} columns but model expects {}",
                design.cols(),
                self.coefficients.len() - 1
            )));
        }
        let b0 = self.coefficients[0];
        Ok((0..design.rows())
            .map(|i| {
                b0 + design
                    .row(i)
                    .iter()
                    .zip(&self.coefficients[1..])
                    .map(|(x, c)| x * c)
                    .sum::<f64>()
            })
            .collect())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
#[inline]
fn log1p_exp(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn with_intercept(design: &Matrix) -> Matrix {
    let n = design.rows();
    let p = design.cols();
    let mut data = Vec::with_capacity(n * (p + 1));
    for i in 0..n {
        data.push(1.0);
        data.extend_from_slice(design.row(i));
    }
    Matrix::from_rows(n, p + 1, data).expect("intercept augmentation")
}

fn binomial_loglik(x: &Matrix, y: &[f64], beta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let eta: f64 = x.row(i).iter().zip(beta).map(|(v, b)| v * b).sum();
            y[i] * eta - log1p_exp(eta)
        })
        .sum()
}

/// Maximum-likelihood logistic regression via iteratively reweighted least
/// squares with step halving, so the log-likelihood never decreases.
///
/// `y` must contain both classes; convergence is declared when the largest
/// absolute score component drops below `tol`.
pub fn fit_logistic(design: &Matrix, y: &[f64], max_iter: usize, tol: f64) -> Result<FittedLinearModel> {
    let n = design.rows();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} rows but {} responses", n, y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Format("logistic response must be 0/1".into()));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::DegenerateResponse(format!(
            "response has a single class ({} of {} are 1)",
            ones, n
        )));
    }
    let x = with_intercept(design);
    let p = x.cols();
    if n < p + 1 {
        return Err(Error::Parameter(format!("{} rows is too few for {} coefficients", n, p)));
    }

    let mut beta = vec![0.0; p];
    let mut loglik = binomial_loglik(&x, y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut weights = vec![0.25; n];

    for iter in 1..=max_iter {
        iterations = iter;
        let eta = x.mat_vec(&beta);
        let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid: Vec<f64> = y.iter().zip(&probs).map(|(yi, pi)| yi - pi).collect();
        let score = x.xtwy(&resid, None);
        if score.iter().all(|s| s.abs() < tol) {
            converged = true;
            break;
        }
        for (w, pi) in weights.iter_mut().zip(&probs) {
            *w = (pi * (1.0 - pi)).max(1e-10);
        }
        let info = x.xtwx(Some(&weights));
        let step = Cholesky::new(&info)
            .map_err(|e| match rank_deficient_pivot(&e) {
                Some(k) => Error::RankDeficient(format!(
                    "weighted normal equations singular at column {}",
                    k
                )),
                None => e,
            })?
            .solve(&score);

        // Step halving keeps the likelihood non-decreasing.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let trial_ll = binomial_loglik(&x, y, &trial);
            if trial_ll >= loglik - 1e-12 {
                beta = trial;
                loglik = trial_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            converged = true; // cannot improve further; treat as stationary
            break;
        }
        let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        if norm > SEPARATION_NORM {
            return Err(Error::Separation(format!("coefficient norm {:.3e} exceeds {:.0e}", norm, SEPARATION_NORM)));
        }
    }

    // Standard errors from the inverse Fisher information at the optimum.
    let eta = x.mat_vec(&beta);
    for (w, e) in weights.iter_mut().zip(&eta) {
        let pi = sigmoid(*e);
        *w = (pi * (1.0 - pi)).max(1e-10);
    }
    let se = Cholesky::new(&x.xtwx(Some(&weights)))
        .ok()
        .map(|ch| {
            let inv = ch.inverse();
            (0..p).map(|j| inv.get(j, j).max(0.0).sqrt()).collect()
        });

    Ok(FittedLinearModel {
        coefficients: beta,
        family: Family::Logistic,
        converged,
        iterations,
        coefficient_se: se,
    })
}

/// Predicted probabilities for a fitted logistic model.
pub fn predict_logistic(model: &FittedLinearModel, design: &Matrix) -> Result<Vec<f64>> {
    Ok(model.linear_predictor(design)?.into_iter().map(sigmoid).collect())
}

/// Ordinary least squares via the normal equations.
pub fn fit_ols(design: &Matrix, y: &[f64]) -> Result<FittedLinearModel> {
    let n = design.rows();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} rows but {} responses", n, y.len())));
    }
    let x = with_intercept(design);
    let p = x.cols();
    if n < p {
        return Err(Error::RankDeficient(format!("{} rows cannot identify {} coefficients", n, p)));
    }
    let xtx = x.xtx();
    let chol = Cholesky::new(&xtx).map_err(|e| match rank_deficient_pivot(&e) {
        Some(k) => Error::RankDeficient(format!("design column {}", k)),
        None => e,
    })?;
    let beta = chol.solve(&x.xtwy(y, None));

    let fitted = x.mat_vec(&beta);
    let rss: f64 = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi).powi(2)).sum();
    let se = if n > p {
        let sigma2 = rss / (n - p) as f64;
        let inv = chol.inverse();
        Some((0..p).map(|j| (sigma2 * inv.get(j, j)).max(0.0).sqrt()).collect())
    } else {
        None
    };

    Ok(FittedLinearModel {
        coefficients: beta,
        family: Family::Gaussian,
        converged: true,
        iterations: 1,
        coefficient_se: se,
    })
}

/// Predicted values from a Gaussian/Huber fit.
pub fn predict_linear(model: &FittedLinearModel, design: &Matrix) -> Result<Vec<f64>> {
    model.linear_predictor(design)
}

/// Huber robust regression by IRLS.
///
/// Weights are `min(1, c*s/|r|)` with the scale `s` re-estimated each
/// iteration as the median absolute deviation of the residuals divided by
/// 0.6745. Standard errors use the M-estimation sandwich. A fit that does
/// not converge within `max_iter` is returned with `converged = false`.
pub fn fit_huber(design: &Matrix, y: &[f64], c: f64, max_iter: usize, tol: f64) -> Result<FittedLinearModel> {
    if c <= 0.0 {
        return Err(Error::Parameter(format!("huber tuning constant must be positive, got {}", c)));
    }
    let ols = fit_ols(design, y)?;
    let x = with_intercept(design);
    let n = x.rows();
    let p = x.cols();

    let mut beta = ols.coefficients;
    let mut converged = false;
    let mut iterations = 0;
    let mut scale = 0.0;

    for iter in 1..=max_iter {
        iterations = iter;
        let fitted = x.mat_vec(&beta);
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
        let med = quantile(&resid, 0.5)?;
        let abs_dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
        scale = quantile(&abs_dev, 0.5)? / 0.6745;
        if scale < 1e-12 {
            // residuals numerically constant: every weight is 1
            converged = true;
            break;
        }
        let cutoff = c * scale;
        let weights: Vec<f64> = resid
            .iter()
            .map(|r| if r.abs() <= cutoff { 1.0 } else { cutoff / r.abs() })
            .collect();
        let new_beta = Cholesky::new(&x.xtwx(Some(&weights)))?.solve(&x.xtwy(y, Some(&weights)));
        let delta = beta
            .iter()
            .zip(&new_beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        beta = new_beta;
        if delta < tol {
            converged = true;
            break;
        }
    }

    let se = huber_sandwich_se(&x, y, &beta, c, scale, n, p);

    Ok(FittedLinearModel {
        coefficients: beta,
        family: Family::Huber,
        converged,
        iterations,
        coefficient_se: se,
    })
}

/// Sandwich variance for the Huber M-estimator:
/// `V = n/(n-p) * s^2 * A^{-1} B A^{-1}` with
/// `A = X' diag(psi'(u)) X`, `B = X' diag(psi(u)^2) X`, `u = r/s`.
fn huber_sandwich_se(
    x: &Matrix,
    y: &[f64],
    beta: &[f64],
    c: f64,
    scale: f64,
    n: usize,
    p: usize,
) -> Option<Vec<f64>> {
    if scale < 1e-12 || n <= p {
        // exact fit: no residual variance to propagate
        return Some(vec![0.0; p]);
    }
    let fitted = x.mat_vec(beta);
    let u: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi) / scale).collect();
    let psi: Vec<f64> = u.iter().map(|&v| v.clamp(-c, c)).collect();
    let dpsi: Vec<f64> = u.iter().map(|&v| if v.abs() <= c { 1.0 } else { 0.0 }).collect();
    let psi2: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let a = x.xtwx(Some(&dpsi));
    let b = x.xtwx(Some(&psi2));
    let a_inv = Cholesky::new(&a).ok()?.inverse();
    let v = a_inv.mat_mul(&b).mat_mul(&a_inv);
    let correction = n as f64 / (n - p) as f64;
    Some(
        (0..p)
            .map(|j| (correction * scale * scale * v.get(j, j)).max(0.0).sqrt())
            .collect(),
    )
}

/// Nearest-rank quantile: the smallest value whose cumulative proportion
/// is at least `p`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Parameter("quantile of empty input".into()));
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Parameter(format!("quantile level {} outside [0, 1]", p)));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}
