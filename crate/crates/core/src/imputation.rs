//! Bayesian linear-regression ("norm") imputation and the strategy catalog.
//!
//! Each strategy resolves, for a given scenario and missing variable, to one
//! imputation formula. Stratified formulas are fit separately in the exposed
//! and unexposed arms; pooled formulas are fit once over all rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Frame, Variable};
use crate::dgp::{DgpKind, MissingTarget, ObservedDataset};
use crate::error::{Error, Result};
use crate::formula::{build_design, ModelFormula, Term};
use crate::numerics::{wls_fit, DesignMatrix, LinearFit, RngStream};

/// Fewest fully observed rows per arm a complete-case analysis accepts.
pub const MIN_COMPLETE_CASES_PER_ARM: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Correct,
    Oversaturated,
    OmitPrecision,
    OmitExposure,
    OmitOutcome,
    OmitConfounder,
    MissingInteraction,
    MisspecPrecision,
    MisspecPrecisionMissingInteraction,
    PrecisionLinearEverywhere,
    MisspecZc2Linear,
    CorrectZc2Quadratic,
}

impl StrategyName {
    pub const ALL: [StrategyName; 12] = [
        StrategyName::Correct,
        StrategyName::Oversaturated,
        StrategyName::OmitPrecision,
        StrategyName::OmitExposure,
        StrategyName::OmitOutcome,
        StrategyName::OmitConfounder,
        StrategyName::MissingInteraction,
        StrategyName::MisspecPrecision,
        StrategyName::MisspecPrecisionMissingInteraction,
        StrategyName::PrecisionLinearEverywhere,
        StrategyName::MisspecZc2Linear,
        StrategyName::CorrectZc2Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyName::Correct => "correct",
            StrategyName::Oversaturated => "oversaturated",
            StrategyName::OmitPrecision => "omit_precision",
            StrategyName::OmitExposure => "omit_exposure",
            StrategyName::OmitOutcome => "omit_outcome",
            StrategyName::OmitConfounder => "omit_confounder",
            StrategyName::MissingInteraction => "missing_interaction",
            StrategyName::MisspecPrecision => "misspec_precision",
            StrategyName::MisspecPrecisionMissingInteraction => {
                "misspec_precision_missing_interaction"
            }
            StrategyName::PrecisionLinearEverywhere => "precision_linear_everywhere",
            StrategyName::MisspecZc2Linear => "misspec_zc2_linear",
            StrategyName::CorrectZc2Quadratic => "correct_zc2_quadratic",
        }
    }

    /// True if this strategy also replaces the analysis outcome model.
    pub fn overrides_analysis(self) -> bool {
        self == StrategyName::PrecisionLinearEverywhere
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyName::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = StrategyName::ALL.iter().map(|k| k.name()).collect();
                Error::Parse(format!(
                    "unknown imputation strategy `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// A strategy resolved to a concrete imputation formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationStrategy {
    pub name: StrategyName,
    pub formula: ModelFormula,
}

fn undefined(name: StrategyName, dgp: DgpKind, target: MissingTarget) -> Error {
    Error::Argument(format!(
        "strategy {name} is not defined for {dgp} with missing {target}"
    ))
}

impl ImputationStrategy {
    /// Looks up the imputation formula of `name` for a scenario.
    pub fn resolve(name: StrategyName, dgp: DgpKind, target: MissingTarget) -> Result<Self> {
        let formula = if dgp.is_multi() {
            multi_formula(name, dgp, target)?
        } else {
            primary_formula(name, dgp, target)?
        };
        Ok(Self { name, formula })
    }

    pub fn target(&self) -> Variable {
        self.formula.response
    }

    pub fn stratified(&self) -> bool {
        self.formula.stratify_by_exposure
    }
}

fn primary_formula(name: StrategyName, dgp: DgpKind, target: MissingTarget) -> Result<ModelFormula> {
    use StrategyName as S;
    use Variable::{Y, Zc, Zp, X};
    let nonlinear = dgp == DgpKind::NonlinearHet;
    match name {
        S::MisspecPrecision | S::MisspecPrecisionMissingInteraction | S::PrecisionLinearEverywhere
            if !nonlinear =>
        {
            return Err(undefined(name, dgp, target))
        }
        S::MisspecZc2Linear | S::CorrectZc2Quadratic => return Err(undefined(name, dgp, target)),
        S::OmitOutcome if target == MissingTarget::Outcome => {
            return Err(undefined(name, dgp, target))
        }
        S::OmitConfounder if target == MissingTarget::Confounder => {
            return Err(undefined(name, dgp, target))
        }
        _ => {}
    }
    let precision = if nonlinear {
        Term::square(Zp)
    } else {
        Term::linear(Zp)
    };
    let (response, other) = match target {
        MissingTarget::Confounder => (Zc, Y),
        MissingTarget::Outcome => (Y, Zc),
    };
    let lin = Term::linear;
    let f = |terms: Vec<Term>| ModelFormula::new(response, terms);
    match name {
        S::Correct => f(vec![lin(other), precision])?.stratified(),
        S::Oversaturated => match target {
            MissingTarget::Confounder => f(vec![lin(Y), Term::spline(Zp, 3)])?.stratified(),
            MissingTarget::Outcome => {
                f(vec![Term::spline(Zc, 3), Term::spline(Zp, 3)])?.stratified()
            }
        },
        S::OmitPrecision => f(vec![lin(other)])?.stratified(),
        S::OmitExposure => f(vec![lin(other), precision]),
        S::OmitOutcome | S::OmitConfounder => f(vec![precision])?.stratified(),
        S::MissingInteraction => f(vec![lin(X), lin(other), precision]),
        S::MisspecPrecision | S::PrecisionLinearEverywhere => {
            f(vec![lin(other), lin(Zp)])?.stratified()
        }
        S::MisspecPrecisionMissingInteraction => f(vec![lin(X), lin(other), lin(Zp)]),
        S::MisspecZc2Linear | S::CorrectZc2Quadratic => unreachable!("rejected above"),
    }
}

fn multi_formula(name: StrategyName, dgp: DgpKind, target: MissingTarget) -> Result<ModelFormula> {
    use StrategyName as S;
    use Variable::{Y, Zc1, Zc2};
    let lin = Term::linear;
    let (response, lead): (Variable, Vec<Term>) = match target {
        MissingTarget::Confounder => (Zc1, vec![lin(Y)]),
        MissingTarget::Outcome => (Y, vec![lin(Zc1)]),
    };
    let with = |tail: Vec<Term>| {
        let mut terms = lead.clone();
        terms.extend(tail);
        ModelFormula::new(response, terms)?.stratified()
    };
    match name {
        S::Correct => with(vec![lin(Zc2), Term::square(Zc2)]),
        S::CorrectZc2Quadratic => with(vec![Term::square(Zc2)]),
        S::MisspecZc2Linear => with(vec![lin(Zc2)]),
        S::Oversaturated => match target {
            MissingTarget::Confounder => with(vec![Term::spline(Zc2, 3)]),
            MissingTarget::Outcome => {
                ModelFormula::new(Y, vec![Term::spline(Zc1, 3), Term::spline(Zc2, 3)])?
                    .stratified()
            }
        },
        _ => Err(undefined(name, dgp, target)),
    }
}

/// A fitted norm model ready to produce posterior-predictive draws.
#[derive(Debug, Clone)]
pub struct NormModel {
    fit: LinearFit,
    missing_rows: Vec<usize>,
    missing_design: Option<DesignMatrix>,
}

impl NormModel {
    /// Fits `formula` on the rows of `rows` whose target value is present.
    /// Missing target entries are NaN in `frame`.
    pub fn fit(frame: &Frame, formula: &ModelFormula, rows: &[usize]) -> Result<Self> {
        let target = frame.column(formula.response)?;
        let (train, missing): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| !target[i].is_nan());
        let p = formula.width();
        if train.len() <= p + 1 {
            return Err(Error::Degenerate(format!(
                "{} training rows for {p} coefficients in `{formula}`",
                train.len()
            )));
        }
        let design = build_design(formula, frame, &train, &train)?;
        let response = formula.response_values(frame, &train)?;
        let fit = wls_fit(&design, &response, None)?;
        let missing_design = if missing.is_empty() {
            None
        } else {
            Some(build_design(formula, frame, &train, &missing)?)
        };
        Ok(Self {
            fit,
            missing_rows: missing,
            missing_design,
        })
    }

    pub fn missing_rows(&self) -> &[usize] {
        &self.missing_rows
    }

    pub fn fit_result(&self) -> &LinearFit {
        &self.fit
    }

    /// One posterior-predictive draw for every missing row.
    ///
    /// `σ*² = σ̂²·ν/w` with `w ~ χ²(ν)`, `β* = β̂ + σ*·R⁻¹z`, then
    /// `X_mis β* + σ*·z'`.
    pub fn draw(&self, stream: &mut RngStream) -> Vec<f64> {
        let Some(design) = &self.missing_design else {
            return Vec::new();
        };
        let nu = self.fit.degrees_freedom as f64;
        let sigma = (self.fit.residual_variance * nu / stream.chi_squared(nu)).sqrt();
        let z = stream.normal_vec(self.fit.coefficients.len());
        let shift = self.fit.gram_inverse_factor().mul_vec(&z);
        let beta: Vec<f64> = self
            .fit
            .coefficients
            .iter()
            .zip(&shift)
            .map(|(b, s)| b + sigma * s)
            .collect();
        design
            .values
            .mul_vec(&beta)
            .into_iter()
            .map(|mu| mu + sigma * stream.standard_normal())
            .collect()
    }
}

/// Draws imputations for the masked `formula.response` entries among `rows`.
/// Returns one value per masked row, in row order.
pub fn norm_draw(
    observed: &ObservedDataset,
    formula: &ModelFormula,
    rows: &[usize],
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    let frame = observed.observed();
    if rows.iter().all(|&i| !observed.is_missing(formula.response, i)) {
        return Ok(Vec::new());
    }
    Ok(NormModel::fit(&frame, formula, rows)?.draw(stream))
}

/// One completed copy of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    pub frame: Frame,
    pub target: Variable,
    /// `imputed[i]` is true when row `i` of `target` was filled in.
    pub imputed: Vec<bool>,
    /// 1-based index within the set of `m` completions.
    pub imputation_index: usize,
}

/// Produces `m` completed datasets. Completion `j` draws from
/// `stream.substream(j)`; a stratified strategy draws the two arms from
/// further independent substreams.
pub fn impute_multiple(
    observed: &ObservedDataset,
    strategy: &ImputationStrategy,
    m: usize,
    stream: &RngStream,
) -> Result<Vec<CompletedDataset>> {
    if m < 2 {
        return Err(Error::Argument(format!("need at least 2 imputations, got {m}")));
    }
    let target = strategy.target();
    if observed.mask(target).is_none() {
        return Err(Error::Argument(format!("{target} has no missingness mask")));
    }
    let frame = observed.observed();
    let groups: Vec<(u64, Vec<usize>)> = if strategy.stratified() {
        vec![(1, frame.arm_rows(1)?), (0, frame.arm_rows(0)?)]
    } else {
        vec![(2, (0..frame.n()).collect())]
    };
    let models = groups
        .iter()
        .map(|(tag, rows)| Ok((*tag, NormModel::fit(&frame, &strategy.formula, rows)?)))
        .collect::<Result<Vec<_>>>()?;
    let imputed: Vec<bool> = (0..frame.n()).map(|i| observed.is_missing(target, i)).collect();

    (1..=m)
        .map(|j| {
            let js = stream.substream(j as u64);
            let mut completed = frame.clone();
            let col = completed.column_mut(target)?;
            for (tag, model) in &models {
                let draws = model.draw(&mut js.substream(*tag));
                for (&row, v) in model.missing_rows().iter().zip(draws) {
                    col[row] = v;
                }
            }
            Ok(CompletedDataset {
                frame: completed,
                target,
                imputed: imputed.clone(),
                imputation_index: j,
            })
        })
        .collect()
}

/// Rows with no masked entry, requiring enough of them in each arm.
pub fn complete_case(observed: &ObservedDataset) -> Result<Frame> {
    let rows = observed.complete_rows();
    let frame = observed.base.frame.select_rows(&rows);
    for arm in [1u8, 0] {
        let count = frame.arm_rows(arm)?.len();
        if count < MIN_COMPLETE_CASES_PER_ARM {
            return Err(Error::Degenerate(format!(
                "only {count} complete cases with x = {arm}"
            )));
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{apply_missingness, generate};
    use crate::numerics::SeedMaterial;

    fn stream(purpose: u64) -> RngStream {
        RngStream::new(SeedMaterial {
            master: 3,
            cell: 4,
            replication: 5,
            purpose,
        })
    }

    fn observed(kind: DgpKind, target: MissingTarget, n: usize) -> ObservedDataset {
        let ds = generate(kind, n, &stream(0)).unwrap();
        apply_missingness(ds, target, &mut stream(1)).unwrap()
    }

    #[test]
    fn catalog_formulas() {
        let r = |n, d, t| ImputationStrategy::resolve(n, d, t).unwrap().formula.to_string();
        use MissingTarget::*;
        use StrategyName as S;
        assert_eq!(r(S::Correct, DgpKind::LinearHet, Confounder), "zc ~ y + zp | x");
        assert_eq!(
            r(S::Oversaturated, DgpKind::LinearHet, Confounder),
            "zc ~ y + ns(zp,3) | x"
        );
        assert_eq!(r(S::OmitExposure, DgpKind::LinearHet, Confounder), "zc ~ y + zp");
        assert_eq!(
            r(S::MissingInteraction, DgpKind::LinearHet, Outcome),
            "y ~ x + zc + zp"
        );
        assert_eq!(r(S::Correct, DgpKind::NonlinearHet, Outcome), "y ~ zc + I(zp^2) | x");
        assert_eq!(
            r(S::MisspecPrecision, DgpKind::NonlinearHet, Confounder),
            "zc ~ y + zp | x"
        );
        assert_eq!(
            r(S::CorrectZc2Quadratic, DgpKind::Multi2, Confounder),
            "zc1 ~ y + I(zc2^2) | x"
        );
        assert_eq!(
            r(S::Oversaturated, DgpKind::Multi3, Outcome),
            "y ~ ns(zc1,3) + ns(zc2,3) | x"
        );
    }

    #[test]
    fn undefined_combinations_rejected() {
        use MissingTarget::*;
        use StrategyName as S;
        assert!(ImputationStrategy::resolve(S::OmitConfounder, DgpKind::LinearHet, Confounder).is_err());
        assert!(ImputationStrategy::resolve(S::OmitOutcome, DgpKind::LinearHet, Outcome).is_err());
        assert!(ImputationStrategy::resolve(S::MisspecPrecision, DgpKind::LinearHom, Outcome).is_err());
        assert!(ImputationStrategy::resolve(S::OmitPrecision, DgpKind::Multi1, Outcome).is_err());
    }

    #[test]
    fn observed_entries_preserved_and_masked_filled() {
        let obs = observed(DgpKind::LinearHet, MissingTarget::Confounder, 400);
        let s = ImputationStrategy::resolve(
            StrategyName::Correct,
            DgpKind::LinearHet,
            MissingTarget::Confounder,
        )
        .unwrap();
        let sets = impute_multiple(&obs, &s, 5, &stream(2)).unwrap();
        let truth = obs.base.frame.column(Variable::Zc).unwrap();
        for c in &sets {
            let zc = c.frame.column(Variable::Zc).unwrap();
            for i in 0..obs.n() {
                if obs.miss_conf[i] {
                    assert!(zc[i].is_finite());
                } else {
                    assert_eq!(zc[i].to_bits(), truth[i].to_bits());
                }
            }
        }
        assert_ne!(sets[0].frame, sets[1].frame);
        assert_eq!(sets, impute_multiple(&obs, &s, 5, &stream(2)).unwrap());
    }

    #[test]
    fn nothing_to_impute() {
        let ds = generate(DgpKind::LinearHet, 100, &stream(0)).unwrap();
        let obs = ObservedDataset::fully_observed(ds);
        let f: ModelFormula = "zc ~ y + zp | x".parse().unwrap();
        let rows: Vec<usize> = (0..100).collect();
        assert!(norm_draw(&obs, &f, &rows, &mut stream(9)).unwrap().is_empty());
    }

    #[test]
    fn noise_free_relation_imputes_prediction() {
        let n = 50;
        let zp: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = zp.iter().map(|v| 2.0 - 3.0 * v).collect();
        let frame = Frame::new(n)
            .with(Variable::Zp, zp.clone())
            .unwrap()
            .with(Variable::Y, y.clone())
            .unwrap()
            .with(Variable::X, vec![0.0; n])
            .unwrap();
        let base = crate::dgp::CompleteDataset {
            kind: DgpKind::LinearHet,
            frame,
            y1: y.clone(),
            y0: y.clone(),
            true_ate: 1.0,
        };
        let mut obs = ObservedDataset::fully_observed(base);
        obs.miss_y[7] = true;
        obs.miss_y[30] = true;
        let f: ModelFormula = "y ~ zp".parse().unwrap();
        let rows: Vec<usize> = (0..n).collect();
        for seed in 0..5 {
            let d = norm_draw(&obs, &f, &rows, &mut stream(seed)).unwrap();
            assert!((d[0] - y[7]).abs() < 1e-9);
            assert!((d[1] - y[30]).abs() < 1e-9);
        }
    }

    #[test]
    fn complete_case_rows() {
        let ds = generate(DgpKind::LinearHet, 200, &stream(0)).unwrap();
        let mut obs = ObservedDataset::fully_observed(ds);
        assert_eq!(complete_case(&obs).unwrap().n(), 200);
        obs.miss_y[3] = true;
        assert_eq!(complete_case(&obs).unwrap().n(), 199);
        let small = ObservedDataset::fully_observed(generate(DgpKind::LinearHet, 40, &stream(0)).unwrap());
        assert!(matches!(complete_case(&small), Err(Error::Degenerate(_))));
    }

    #[test]
    fn strategy_names_parse() {
        for s in StrategyName::ALL {
            assert_eq!(s.name().parse::<StrategyName>().unwrap(), s);
        }
        let err = "omit_everything".parse::<StrategyName>().unwrap_err().to_string();
        assert!(err.contains("missing_interaction"));
    }
}
