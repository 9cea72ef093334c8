//! Model formulas shared by imputation and analysis models.
//!
//! Formulas use a small R-like notation:
//!
//! ```text
//! zc ~ y + ns(zp,3) + I(zp^2) + x:zc | x
//! ```
//!
//! `| x` marks a formula that is fit separately within each exposure arm and
//! `- 1` drops the intercept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Frame, Variable};
use crate::error::{Error, Result};
use crate::numerics::{DesignMatrix, Matrix, NaturalSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    Square,
    NaturalSpline(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub variable: Variable,
    pub transform: Transform,
}

impl Term {
    pub fn linear(variable: Variable) -> Self {
        Self {
            variable,
            transform: Transform::Identity,
        }
    }

    pub fn square(variable: Variable) -> Self {
        Self {
            variable,
            transform: Transform::Square,
        }
    }

    pub fn spline(variable: Variable, df: usize) -> Self {
        Self {
            variable,
            transform: Transform::NaturalSpline(df),
        }
    }

    pub fn is_spline(&self) -> bool {
        matches!(self.transform, Transform::NaturalSpline(_))
    }

    /// Realized columns of this term on `eval` rows, with spline knots from `train` rows.
    fn block(&self, frame: &Frame, train: &[usize], eval: &[usize]) -> Result<Vec<Vec<f64>>> {
        let col = frame.column(self.variable)?;
        let values: Vec<f64> = eval.iter().map(|&i| col[i]).collect();
        match self.transform {
            Transform::Identity => Ok(vec![values]),
            Transform::Square => Ok(vec![values.iter().map(|v| v * v).collect()]),
            Transform::NaturalSpline(df) => {
                let knots_from: Vec<f64> = train.iter().map(|&i| col[i]).collect();
                let basis = NaturalSpline::fit(&knots_from, df)?.evaluate(&values)?;
                Ok((0..df).map(|j| basis.column(j).to_vec()).collect())
            }
        }
    }

    fn labels(&self) -> Vec<String> {
        match self.transform {
            Transform::NaturalSpline(df) => (1..=df).map(|k| format!("{self}{k}")).collect(),
            _ => vec![self.to_string()],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transform {
            Transform::Identity => write!(f, "{}", self.variable),
            Transform::Square => write!(f, "I({}^2)", self.variable),
            Transform::NaturalSpline(df) => write!(f, "ns({},{df})", self.variable),
        }
    }
}

impl FromStr for Term {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(inner) = s.strip_prefix("I(").and_then(|r| r.strip_suffix("^2)")) {
            return Ok(Term::square(inner.parse()?));
        }
        if let Some(inner) = s.strip_prefix("ns(").and_then(|r| r.strip_suffix(')')) {
            let (var, df) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("spline term `{s}` needs a df")))?;
            let df: usize = df
                .parse()
                .map_err(|_| Error::Parse(format!("bad spline df in `{s}`")))?;
            if df == 0 {
                return Err(Error::Parse(format!("spline df must be at least 1 in `{s}`")));
            }
            return Ok(Term::spline(var.parse()?, df));
        }
        Ok(Term::linear(s.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelFormula {
    pub response: Variable,
    pub terms: Vec<Term>,
    pub include_intercept: bool,
    pub interactions: Vec<(Term, Term)>,
    pub stratify_by_exposure: bool,
}

impl ModelFormula {
    /// Intercept plus `terms`, unstratified.
    pub fn new(response: Variable, terms: Vec<Term>) -> Result<Self> {
        let f = Self {
            response,
            terms,
            include_intercept: true,
            interactions: Vec::new(),
            stratify_by_exposure: false,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn stratified(mut self) -> Result<Self> {
        self.stratify_by_exposure = true;
        self.validate()?;
        Ok(self)
    }

    pub fn with_interaction(mut self, a: Term, b: Term) -> Result<Self> {
        self.interactions.push((a, b));
        self.validate()?;
        Ok(self)
    }

    pub fn without_intercept(mut self) -> Result<Self> {
        self.include_intercept = false;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all_terms = || {
            self.terms
                .iter()
                .chain(self.interactions.iter().flat_map(|(a, b)| [a, b]))
        };
        if all_terms().any(|t| t.variable == self.response) {
            return Err(Error::Argument(format!(
                "response {} appears among the regressors of `{self}`",
                self.response
            )));
        }
        if self.stratify_by_exposure && all_terms().any(|t| t.variable == Variable::X) {
            return Err(Error::Argument(format!(
                "stratified formula `{self}` must not use the exposure as a regressor"
            )));
        }
        if all_terms().any(|t| t.transform == Transform::NaturalSpline(0)) {
            return Err(Error::Argument("spline df must be at least 1".into()));
        }
        if !self.include_intercept && self.terms.is_empty() && self.interactions.is_empty() {
            return Err(Error::Argument("formula has no columns".into()));
        }
        Ok(())
    }

    /// Every variable the design reads, response excluded.
    pub fn regressors(&self) -> Vec<Variable> {
        let mut vars: Vec<Variable> = self
            .terms
            .iter()
            .chain(self.interactions.iter().flat_map(|(a, b)| [a, b]))
            .map(|t| t.variable)
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    /// Number of design columns.
    pub fn width(&self) -> usize {
        let w = |t: &Term| match t.transform {
            Transform::NaturalSpline(df) => df,
            _ => 1,
        };
        usize::from(self.include_intercept)
            + self.terms.iter().map(w).sum::<usize>()
            + self.interactions.iter().map(|(a, b)| w(a) * w(b)).sum::<usize>()
    }

    /// Column labels in design order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        if self.include_intercept {
            out.push("(Intercept)".to_string());
        }
        for t in self.terms.iter().filter(|t| !t.is_spline()) {
            out.extend(t.labels());
        }
        for t in self.terms.iter().filter(|t| t.is_spline()) {
            out.extend(t.labels());
        }
        for (a, b) in &self.interactions {
            for la in a.labels() {
                for lb in b.labels() {
                    out.push(format!("{la}:{lb}"));
                }
            }
        }
        out
    }

    /// Response values on `rows`, refusing missing entries.
    pub fn response_values(&self, frame: &Frame, rows: &[usize]) -> Result<Vec<f64>> {
        let col = frame.column(self.response)?;
        let vals: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
        if vals.iter().any(|v| v.is_nan()) {
            return Err(Error::Integrity(format!(
                "response {} is missing on rows used to fit `{self}`",
                self.response
            )));
        }
        Ok(vals)
    }
}

/// Builds the design matrix of `formula` on `eval` rows.
///
/// Columns are ordered intercept, non-spline terms, spline blocks, then
/// interactions, each group in declaration order. Spline knots are computed
/// from `train` rows only. Every regressor must be present on both row sets;
/// a NaN entry means an unimputed value and is an integrity error.
pub fn build_design(
    formula: &ModelFormula,
    frame: &Frame,
    train: &[usize],
    eval: &[usize],
) -> Result<DesignMatrix> {
    formula.validate()?;
    for var in formula.regressors() {
        let col = frame.column(var)?;
        if train.iter().chain(eval).any(|&i| col[i].is_nan()) {
            return Err(Error::Integrity(format!(
                "variable {var} has missing values on rows used by `{formula}`"
            )));
        }
    }
    let n = eval.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(formula.width());
    if formula.include_intercept {
        columns.push(vec![1.0; n]);
    }
    for t in formula.terms.iter().filter(|t| !t.is_spline()) {
        columns.extend(t.block(frame, train, eval)?);
    }
    for t in formula.terms.iter().filter(|t| t.is_spline()) {
        columns.extend(t.block(frame, train, eval)?);
    }
    for (a, b) in &formula.interactions {
        let ba = a.block(frame, train, eval)?;
        let bb = b.block(frame, train, eval)?;
        for ca in &ba {
            for cb in &bb {
                columns.push(ca.iter().zip(cb).map(|(u, v)| u * v).collect());
            }
        }
    }
    DesignMatrix::new(Matrix::from_columns(n, &columns)?, formula.labels())
}

impl fmt::Display for ModelFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.terms.iter().map(Term::to_string).collect();
        parts.extend(self.interactions.iter().map(|(a, b)| format!("{a}:{b}")));
        if parts.is_empty() {
            parts.push(if self.include_intercept { "1" } else { "0" }.to_string());
        } else if !self.include_intercept {
            parts.push("- 1".to_string());
        }
        let rhs = parts.join(" + ").replace("+ - 1", "- 1");
        write!(f, "{} ~ {rhs}", self.response)?;
        if self.stratify_by_exposure {
            f.write_str(" | x")?;
        }
        Ok(())
    }
}

impl FromStr for ModelFormula {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (lhs, rest) = compact
            .split_once('~')
            .ok_or_else(|| Error::Parse(format!("formula `{s}` has no `~`")))?;
        let response: Variable = lhs.parse()?;
        let (mut rhs, stratify) = match rest.split_once('|') {
            Some((r, "x")) => (r.to_string(), true),
            Some((_, other)) => {
                return Err(Error::Parse(format!(
                    "formulas can only be stratified by x, not `{other}`"
                )))
            }
            None => (rest.to_string(), false),
        };
        let mut include_intercept = true;
        if let Some(r) = rhs.strip_suffix("-1") {
            include_intercept = false;
            rhs = r.to_string();
        }
        let mut terms = Vec::new();
        let mut interactions = Vec::new();
        for item in rhs.split('+').filter(|p| !p.is_empty()) {
            match item {
                "1" => {}
                "0" => include_intercept = false,
                _ => match item.split_once(':') {
                    Some((a, b)) => interactions.push((a.parse()?, b.parse()?)),
                    None => terms.push(item.parse()?),
                },
            }
        }
        let f = ModelFormula {
            response,
            terms,
            include_intercept,
            interactions,
            stratify_by_exposure: stratify,
        };
        f.validate().map_err(|e| Error::Parse(format!("`{s}`: {e}")))?;
        Ok(f)
    }
}
