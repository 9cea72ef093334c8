//! Propensity scores, per-arm outcome models and the IPW / AIPW estimators.

use serde::{Deserialize, Serialize};

use crate::data::{Frame, Variable};
use crate::error::{Error, Result};
use crate::formula::{build_design, ModelFormula};
use crate::numerics::{logistic_fit, wls_fit};

/// Fitted propensities are clipped to `[PROPENSITY_CLIP, 1 - PROPENSITY_CLIP]`.
pub const PROPENSITY_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityScores {
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmPredictions {
    pub mu1: Vec<f64>,
    pub mu0: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithVariance {
    pub delta_hat: f64,
    pub within_variance: f64,
    pub n: usize,
}

pub fn clip_propensity(p: f64) -> f64 {
    p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
}

/// Logistic regression of the exposure on `ps_formula` over all rows.
pub fn fit_propensity(data: &Frame, ps_formula: &ModelFormula) -> Result<PropensityScores> {
    if ps_formula.response != Variable::X {
        return Err(Error::Argument(format!(
            "propensity formula `{ps_formula}` must have x as its response"
        )));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    let design = build_design(ps_formula, data, &rows, &rows)?;
    let x = ps_formula.response_values(data, &rows)?;
    let fit = logistic_fit(&design, &x)?;
    Ok(PropensityScores {
        pi: fit.predict(&design).into_iter().map(clip_propensity).collect(),
    })
}

/// Fits `outcome_formula` separately in each arm and predicts every row from both fits.
pub fn fit_outcome_by_arm(data: &Frame, outcome_formula: &ModelFormula) -> Result<ArmPredictions> {
    let all: Vec<usize> = (0..data.n()).collect();
    let p = outcome_formula.width();
    let predict = |arm: u8| -> Result<Vec<f64>> {
        let rows = data.arm_rows(arm)?;
        if rows.len() <= p {
            return Err(Error::Degenerate(format!(
                "arm x = {arm} has {} rows for {p} outcome-model coefficients",
                rows.len()
            )));
        }
        let train = build_design(outcome_formula, data, &rows, &rows)?;
        let y = outcome_formula.response_values(data, &rows)?;
        let fit = wls_fit(&train, &y, None)?;
        Ok(fit.predict(&build_design(outcome_formula, data, &rows, &all)?))
    };
    Ok(ArmPredictions {
        mu1: predict(1)?,
        mu0: predict(0)?,
    })
}

/// The AIPW contribution of each row.
pub fn aipw_contributions(
    x: &[f64],
    y: &[f64],
    pi: &[f64],
    mu1: &[f64],
    mu0: &[f64],
) -> Result<Vec<f64>> {
    let n = x.len();
    if [y.len(), pi.len(), mu1.len(), mu0.len()].iter().any(|&l| l != n) {
        return Err(Error::Argument("AIPW inputs differ in length".into()));
    }
    Ok((0..n)
        .map(|i| {
            (mu1[i] - mu0[i]) + x[i] * (y[i] - mu1[i]) / pi[i]
                - (1.0 - x[i]) * (y[i] - mu0[i]) / (1.0 - pi[i])
        })
        .collect())
}

/// Mean of the contributions and their sample variance over `n`.
pub fn summarize_contributions(psi: &[f64]) -> Result<EstimateWithVariance> {
    let n = psi.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("{n} rows is too few for a variance")));
    }
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite influence contribution".into()));
    }
    let nf = n as f64;
    let mean = psi.iter().sum::<f64>() / nf;
    let ss: f64 = psi.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(EstimateWithVariance {
        delta_hat: mean,
        within_variance: ss / (nf - 1.0) / nf,
        n,
    })
}

pub fn aipw_from_parts(
    x: &[f64],
    y: &[f64],
    pi: &[f64],
    mu1: &[f64],
    mu0: &[f64],
) -> Result<EstimateWithVariance> {
    summarize_contributions(&aipw_contributions(x, y, pi, mu1, mu0)?)
}

/// IPW is AIPW with both outcome models identically zero.
pub fn ipw_from_parts(x: &[f64], y: &[f64], pi: &[f64]) -> Result<EstimateWithVariance> {
    let zeros = vec![0.0; x.len()];
    aipw_from_parts(x, y, pi, &zeros, &zeros)
}

pub fn aipw_estimate(
    data: &Frame,
    ps_formula: &ModelFormula,
    outcome_formula: &ModelFormula,
) -> Result<EstimateWithVariance> {
    let ps = fit_propensity(data, ps_formula)?;
    let mu = fit_outcome_by_arm(data, outcome_formula)?;
    aipw_from_parts(
        data.column(Variable::X)?,
        data.column(Variable::Y)?,
        &ps.pi,
        &mu.mu1,
        &mu.mu0,
    )
}

pub fn ipw_estimate(data: &Frame, ps_formula: &ModelFormula) -> Result<EstimateWithVariance> {
    let ps = fit_propensity(data, ps_formula)?;
    ipw_from_parts(data.column(Variable::X)?, data.column(Variable::Y)?, &ps.pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipw_two_rows() {
        let e = ipw_from_parts(&[1.0, 0.0], &[2.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(e.delta_hat, 1.0);
        assert_eq!(e.n, 2);
    }

    #[test]
    fn zero_residuals_give_outcome_contrast() {
        let x = [1.0, 0.0, 1.0, 0.0];
        let mu1 = [3.0, 2.0, 5.0, 1.0];
        let mu0 = [1.0, 1.5, 2.0, 0.0];
        let y: Vec<f64> = (0..4).map(|i| if x[i] == 1.0 { mu1[i] } else { mu0[i] }).collect();
        let e = aipw_from_parts(&x, &y, &[0.3, 0.6, 0.2, 0.9], &mu1, &mu0).unwrap();
        let expected = (2.0 + 0.5 + 3.0 + 1.0) / 4.0;
        assert!((e.delta_hat - expected).abs() < 1e-15);
    }

    #[test]
    fn horvitz_thompson_reduction() {
        let x = [1.0, 1.0, 0.0, 0.0, 1.0];
        let y = [2.0, -1.0, 4.0, 0.5, 3.0];
        let e = aipw_from_parts(&x, &y, &[0.5; 5], &[0.0; 5], &[0.0; 5]).unwrap();
        let ht: f64 = (0..5)
            .map(|i| 2.0 * x[i] * y[i] - 2.0 * (1.0 - x[i]) * y[i])
            .sum::<f64>()
            / 5.0;
        assert!((e.delta_hat - ht).abs() < 1e-15);
    }

    #[test]
    fn clipping() {
        assert_eq!(clip_propensity(1.0 - 1e-12), 1.0 - 1e-6);
        assert_eq!(clip_propensity(0.0), 1e-6);
        assert_eq!(clip_propensity(0.3), 0.3);
    }

    #[test]
    fn non_finite_contributions_rejected() {
        let err = aipw_from_parts(&[1.0, 0.0], &[f64::INFINITY, 1.0], &[0.5; 2], &[0.0; 2], &[0.0; 2]);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }
}
