//! Binomial-logit maximum likelihood by iteratively reweighted least squares.

use super::matrix::{DesignMatrix, Matrix};
use super::wls::wls_fit;
use crate::error::{Error, Result};

pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const DEVIANCE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 50;
/// Fitted probabilities closer than this to 0 or 1 count as pinned.
pub const SEPARATION_THRESHOLD: f64 = 1e-10;
/// Rows this close to 0 or 1 trigger the divergence check at convergence.
const NEAR_PINNED: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute component of `Xᵀ(y - p)` at the returned coefficients.
    pub max_abs_score: f64,
}

impl LogisticFit {
    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        design
            .values
            .mul_vec(&self.coefficients)
            .into_iter()
            .map(expit)
            .collect()
    }
}

pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn deviance(y: &[f64], p: &[f64]) -> f64 {
    y.iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = if yi > 0.5 { pi } else { 1.0 - pi };
            -2.0 * q.max(f64::MIN_POSITIVE).ln()
        })
        .sum()
}

fn score(x: &Matrix, y: &[f64], p: &[f64]) -> f64 {
    let r: Vec<f64> = y.iter().zip(p).map(|(a, b)| a - b).collect();
    x.tr_mul_vec(&r).into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// One IRLS step from the linear predictor `eta`; returns the new coefficients.
fn irls_step(design: &DesignMatrix, y: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    let mut z = Vec::with_capacity(y.len());
    let mut w = Vec::with_capacity(y.len());
    for (&yi, &ei) in y.iter().zip(eta) {
        let p = expit(ei);
        let wi = p * (1.0 - p);
        w.push(wi);
        z.push(if wi > 0.0 { ei + (yi - p) / wi } else { ei });
    }
    Ok(wls_fit(design, &z, Some(&w))?.coefficients)
}

/// Fits `logit P(y = 1) = design · β` by IRLS.
///
/// Stops when the largest absolute score falls below [`SCORE_TOLERANCE`] or the
/// relative deviance change drops below [`DEVIANCE_TOLERANCE`]. If fitted
/// probabilities end up pinned at 0 or 1 and another Newton step would still
/// push them outward, the fit is reported as separated.
pub fn logistic_fit(design: &DesignMatrix, response: &[f64]) -> Result<LogisticFit> {
    let (n, p) = (design.rows(), design.cols());
    if response.len() != n {
        return Err(Error::Argument(format!(
            "response has length {} but design has {n} rows",
            response.len()
        )));
    }
    if n < p {
        return Err(Error::Argument(format!("{n} rows for {p} columns")));
    }
    if response.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Argument("logistic response must be 0/1".into()));
    }

    // Start from the glm-style initial means (y + 0.5) / 2.
    let eta0: Vec<f64> = response
        .iter()
        .map(|&y| {
            let mu: f64 = (y + 0.5) / 2.0;
            (mu / (1.0 - mu)).ln()
        })
        .collect();
    let mut beta = irls_step(design, response, &eta0)?;
    let mut eta = design.values.mul_vec(&beta);
    let mut probs: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
    let mut dev = deviance(response, &probs);
    let mut max_score = score(&design.values, response, &probs);
    let mut iterations = 1;
    let mut converged = max_score < SCORE_TOLERANCE;

    while !converged && iterations < MAX_ITERATIONS {
        beta = irls_step(design, response, &eta)?;
        eta = design.values.mul_vec(&beta);
        probs = eta.iter().map(|&e| expit(e)).collect();
        let new_dev = deviance(response, &probs);
        max_score = score(&design.values, response, &probs);
        iterations += 1;
        let rel_change = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        converged = max_score < SCORE_TOLERANCE || rel_change < DEVIANCE_TOLERANCE;
    }

    let near = |q: f64, tol: f64| q < tol || q > 1.0 - tol;
    if !converged && probs.iter().any(|&q| near(q, SEPARATION_THRESHOLD)) {
        return Err(Error::Separation { iterations });
    }
    let pinned: Vec<usize> = (0..n).filter(|&i| near(probs[i], NEAR_PINNED)).collect();
    if converged && !pinned.is_empty() {
        // The score also vanishes along a separating direction. A finite
        // optimum leaves extreme rows in place; a separated fit keeps pushing
        // them towards ±∞ by roughly one logit unit per step.
        let next = irls_step(design, response, &eta)?;
        let next_eta = design.values.mul_vec(&next);
        let drift = pinned
            .iter()
            .map(|&i| (next_eta[i] - eta[i]).abs())
            .fold(0.0, f64::max);
        if drift > 0.1 {
            return Err(Error::Separation { iterations });
        }
    }
    if !converged {
        return Err(Error::Degenerate(format!(
            "logistic fit did not converge in {iterations} iterations (score {max_score:.3e})"
        )));
    }

    Ok(LogisticFit {
        coefficients: beta,
        converged,
        iterations,
        max_abs_score: max_score,
    })
}
