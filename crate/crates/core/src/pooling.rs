//! Rubin's rules.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::estimators::EstimateWithVariance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub delta_bar: f64,
    pub u_bar: f64,
    pub b: f64,
    pub t: f64,
    pub m: usize,
    /// Infinite when the interval uses a normal quantile.
    pub dof: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl PooledResult {
    pub fn se(&self) -> f64 {
        self.t.sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// The interval with a normal quantile in place of the t quantile.
    pub fn normal_interval(&self, confidence: f64) -> Result<(f64, f64)> {
        let h = normal_quantile(confidence)? * self.se();
        Ok((self.delta_bar - h, self.delta_bar + h))
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("confidence {confidence} outside (0, 1)")))
    }
}

fn normal_quantile(confidence: f64) -> Result<f64> {
    check_confidence(confidence)?;
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    Ok(z)
}

/// Above this many degrees of freedom the t quantile comes from a
/// Cornish-Fisher expansion; the incomplete-beta inversion in `statrs`
/// loses accuracy and can stall for very large values.
const T_EXPANSION_DOF: f64 = 1e4;

/// Two-sided `confidence` quantile of Student's t with `dof` degrees of freedom.
pub fn t_quantile(confidence: f64, dof: f64) -> Result<f64> {
    check_confidence(confidence)?;
    if !(dof > 0.0) {
        return Err(Error::Argument(format!("t degrees of freedom {dof} not positive")));
    }
    if dof.is_infinite() {
        return normal_quantile(confidence);
    }
    if dof > T_EXPANSION_DOF {
        let z = normal_quantile(confidence)?;
        let (z3, z5) = (z.powi(3), z.powi(5));
        return Ok(z + (z3 + z) / (4.0 * dof) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * dof * dof));
    }
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Degenerate(format!("t distribution: {e}")))?;
    Ok(dist.inverse_cdf(0.5 + confidence / 2.0))
}

/// Combines per-imputation estimates.
///
/// `B = 0` gives infinite degrees of freedom and a normal quantile.
pub fn pool_rubin(estimates: &[EstimateWithVariance], confidence: f64) -> Result<PooledResult> {
    check_confidence(confidence)?;
    let m = estimates.len();
    if m < 2 {
        return Err(Error::Argument(format!(
            "Rubin's rules need at least 2 estimates, got {m}"
        )));
    }
    if estimates
        .iter()
        .any(|e| !e.delta_hat.is_finite() || !e.within_variance.is_finite())
    {
        return Err(Error::Degenerate("non-finite estimate or variance".into()));
    }
    let mf = m as f64;
    let delta_bar = estimates.iter().map(|e| e.delta_hat).sum::<f64>() / mf;
    let u_bar = estimates.iter().map(|e| e.within_variance).sum::<f64>() / mf;
    // The rounded mean of identical values can differ from them in the last bit.
    let b = if estimates.iter().all(|e| e.delta_hat == estimates[0].delta_hat) {
        0.0
    } else {
        estimates
            .iter()
            .map(|e| (e.delta_hat - delta_bar).powi(2))
            .sum::<f64>()
            / (mf - 1.0)
    };
    let inflation = (1.0 + 1.0 / mf) * b;
    let t = u_bar + inflation;
    let (dof, q) = if b > 0.0 {
        let dof = (mf - 1.0) * (1.0 + u_bar / inflation).powi(2);
        (dof, t_quantile(confidence, dof)?)
    } else {
        (f64::INFINITY, normal_quantile(confidence)?)
    };
    let h = q * t.sqrt();
    Ok(PooledResult {
        delta_bar,
        u_bar,
        b,
        t,
        m,
        dof,
        ci_low: delta_bar - h,
        ci_high: delta_bar + h,
    })
}

/// Normal-quantile interval for a single estimate, as used by complete-case analysis.
pub fn single_estimate(estimate: &EstimateWithVariance, confidence: f64) -> Result<PooledResult> {
    let h = normal_quantile(confidence)? * estimate.within_variance.sqrt();
    Ok(PooledResult {
        delta_bar: estimate.delta_hat,
        u_bar: estimate.within_variance,
        b: 0.0,
        t: estimate.within_variance,
        m: 1,
        dof: f64::INFINITY,
        ci_low: estimate.delta_hat - h,
        ci_high: estimate.delta_hat + h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(d: f64, v: f64) -> EstimateWithVariance {
        EstimateWithVariance {
            delta_hat: d,
            within_variance: v,
            n: 10,
        }
    }

    #[test]
    fn two_estimates() {
        let p = pool_rubin(&[est(1.0, 1.0), est(3.0, 1.0)], 0.95).unwrap();
        assert_eq!(p.delta_bar, 2.0);
        assert_eq!(p.u_bar, 1.0);
        assert_eq!(p.b, 2.0);
        assert_eq!(p.t, 4.0);
        assert_eq!(p.se(), 2.0);
    }

    #[test]
    fn identical_estimates_use_normal_quantile() {
        let p = pool_rubin(&[est(0.7, 0.04); 6], 0.95).unwrap();
        assert_eq!(p.b, 0.0);
        assert_eq!(p.t, 0.04);
        assert!(p.dof.is_infinite());
        assert!((p.ci_high - (0.7 + 1.959_964 * 0.2)).abs() < 1e-6);
    }

    #[test]
    fn t_quantile_is_continuous_at_the_switch() {
        let below = t_quantile(0.95, T_EXPANSION_DOF).unwrap();
        let above = t_quantile(0.95, T_EXPANSION_DOF * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() < 1e-10);
        assert!((t_quantile(0.95, 10.0).unwrap() - 2.228_138_85).abs() < 1e-7);
        let huge = t_quantile(0.95, 4e9).unwrap();
        assert!((huge - 1.959_963_985).abs() < 1e-8);
    }

    #[test]
    fn too_few_estimates() {
        assert!(matches!(pool_rubin(&[est(1.0, 1.0)], 0.95), Err(Error::Argument(_))));
    }

    #[test]
    fn single_estimate_interval() {
        let p = single_estimate(&est(1.0, 0.25), 0.95).unwrap();
        assert!((p.ci_low - (1.0 - 1.959_964 * 0.5)).abs() < 1e-6);
        assert!(p.covers(1.5) && !p.covers(2.0));
    }
}
