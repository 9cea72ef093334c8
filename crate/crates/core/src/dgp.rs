//! Synthetic data generators and MAR missingness mechanisms.
//!
//! Primary scenarios draw `zi ~ N(0,1)`, `zp ~ N(0,1)`, `zc ~ N(1,1)` and
//! `x ~ Bernoulli(expit(1 - zc + 2 zi))`, with the outcome given by one of
//!
//! ```text
//! linear_het:    Y = 0.5X + Zc + 2Zp   + 0.5X·Zc + ε
//! linear_hom:    Y =    X + Zc + 2Zp             + ε
//! nonlinear_het: Y = 0.5X + Zc + 2Zp²  + 0.5X·Zc + ε
//! ```
//!
//! Multiple-confounder scenarios draw `zc1, zc2 ~ N(1,1)` and vary where the
//! quadratic `zc2` term enters (exposure model for 1 and 3, outcome for 2 and 3).
//! The average treatment effect is 1 everywhere.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Frame, Variable};
use crate::error::{Error, Result};
use crate::numerics::{expit, RngStream};

const TAG_ZI: u64 = 1;
const TAG_ZP: u64 = 2;
const TAG_ZC: u64 = 3;
const TAG_ZC1: u64 = 4;
const TAG_ZC2: u64 = 5;
const TAG_EXPOSURE: u64 = 6;
const TAG_NOISE: u64 = 7;

pub const TRUE_ATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    LinearHet,
    LinearHom,
    NonlinearHet,
    Multi1,
    Multi2,
    Multi3,
}

impl DgpKind {
    pub const ALL: [DgpKind; 6] = [
        DgpKind::LinearHet,
        DgpKind::LinearHom,
        DgpKind::NonlinearHet,
        DgpKind::Multi1,
        DgpKind::Multi2,
        DgpKind::Multi3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgpKind::LinearHet => "linear_het",
            DgpKind::LinearHom => "linear_hom",
            DgpKind::NonlinearHet => "nonlinear_het",
            DgpKind::Multi1 => "multi_1",
            DgpKind::Multi2 => "multi_2",
            DgpKind::Multi3 => "multi_3",
        }
    }

    pub fn is_multi(self) -> bool {
        matches!(self, DgpKind::Multi1 | DgpKind::Multi2 | DgpKind::Multi3)
    }

    /// The confounder that receives missingness in confounder-missing cells.
    pub fn missing_confounder(self) -> Variable {
        if self.is_multi() {
            Variable::Zc1
        } else {
            Variable::Zc
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DgpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = DgpKind::ALL.iter().map(|k| k.name()).collect();
                Error::Parse(format!("unknown dgp `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingTarget {
    Outcome,
    Confounder,
}

impl MissingTarget {
    pub fn name(self) -> &'static str {
        match self {
            MissingTarget::Outcome => "outcome",
            MissingTarget::Confounder => "confounder",
        }
    }
}

impl fmt::Display for MissingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MissingTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outcome" => Ok(MissingTarget::Outcome),
            "confounder" => Ok(MissingTarget::Confounder),
            _ => Err(Error::Parse(format!(
                "unknown missing target `{s}` (expected outcome or confounder)"
            ))),
        }
    }
}

/// One fully observed replication, including both potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteDataset {
    pub kind: DgpKind,
    /// Observed columns: `x`, `y` and the scenario's covariates.
    pub frame: Frame,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    pub true_ate: f64,
}

impl CompleteDataset {
    pub fn n(&self) -> usize {
        self.frame.n()
    }

    /// Writes `x, y, <covariates>, miss_y, miss_conf` rows for debugging.
    pub fn write_csv<W: Write>(&self, out: W, masks: Option<(&[bool], &[bool])>) -> Result<()> {
        let vars: Vec<Variable> = self.frame.variables();
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Argument(format!("csv write failed: {e}"));
        let mut header: Vec<String> = vars.iter().map(|v| v.name().to_string()).collect();
        header.push("miss_y".into());
        header.push("miss_conf".into());
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = vars
                .iter()
                .map(|v| format!("{}", self.frame.column(*v).map(|c| c[i]).unwrap_or(f64::NAN)))
                .collect();
            let (my, mc) = masks.map_or((false, false), |(a, b)| (a[i], b[i]));
            rec.push(u8::from(my).to_string());
            rec.push(u8::from(mc).to_string());
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Argument(format!("csv write failed: {e}")))
    }
}

/// A dataset with missingness masks applied to one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    pub base: CompleteDataset,
    pub miss_y: Vec<bool>,
    pub miss_conf: Vec<bool>,
    /// The confounder column `miss_conf` refers to.
    pub confounder: Variable,
}

impl ObservedDataset {
    /// Wraps a complete dataset with empty masks.
    pub fn fully_observed(base: CompleteDataset) -> Self {
        let n = base.n();
        let confounder = base.kind.missing_confounder();
        Self {
            base,
            miss_y: vec![false; n],
            miss_conf: vec![false; n],
            confounder,
        }
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Missingness mask for `var`; variables without a mask are fully observed.
    pub fn mask(&self, var: Variable) -> Option<&[bool]> {
        if var == Variable::Y {
            Some(&self.miss_y)
        } else if var == self.confounder {
            Some(&self.miss_conf)
        } else {
            None
        }
    }

    pub fn is_missing(&self, var: Variable, row: usize) -> bool {
        self.mask(var).is_some_and(|m| m[row])
    }

    /// The observed data: the base frame with every masked entry replaced by NaN.
    pub fn observed(&self) -> Frame {
        let mut f = self.base.frame.clone();
        for var in [Variable::Y, self.confounder] {
            let mask = self.mask(var).expect("masked variables have masks").to_vec();
            if let Ok(col) = f.column_mut(var) {
                for (v, m) in col.iter_mut().zip(mask) {
                    if m {
                        *v = f64::NAN;
                    }
                }
            }
        }
        f
    }

    /// Rows with no masked entry.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| !self.miss_y[i] && !self.miss_conf[i])
            .collect()
    }
}

fn normal_column(stream: &RngStream, tag: u64, n: usize, mean: f64) -> Vec<f64> {
    let mut s = stream.substream(tag);
    (0..n).map(|_| mean + s.standard_normal()).collect()
}

fn bernoulli_column(stream: &RngStream, probs: &[f64]) -> Vec<f64> {
    let mut s = stream.substream(TAG_EXPOSURE);
    probs
        .iter()
        .map(|&p| if s.bernoulli(p) { 1.0 } else { 0.0 })
        .collect()
}

/// `P(X = 1)` in the primary scenarios.
pub fn primary_exposure_probability(zc: f64, zi: f64) -> f64 {
    expit(1.0 - zc + 2.0 * zi)
}

/// `P(X = 1)` in the multiple-confounder scenarios.
pub fn multi_exposure_probability(scenario: u8, zc1: f64, zc2: f64) -> f64 {
    let z2 = if scenario == 2 { zc2 } else { zc2 * zc2 };
    1.0 / (1.0 + (zc1 + z2).exp())
}

/// `P(M^Y = 1)` given the (first) confounder.
pub fn outcome_missing_probability(zc: f64) -> f64 {
    1.0 / (1.0 + (0.65 + zc).exp())
}

/// `P(M^Zc = 1)` given the exposure.
pub fn confounder_missing_probability(x: f64) -> f64 {
    expit(-1.15 - 0.5 * x)
}

fn assemble(
    kind: DgpKind,
    mut frame: Frame,
    x: Vec<f64>,
    y1: Vec<f64>,
    y0: Vec<f64>,
) -> Result<CompleteDataset> {
    let y: Vec<f64> = x
        .iter()
        .zip(y1.iter().zip(&y0))
        .map(|(&xi, (&a, &b))| if xi == 1.0 { a } else { b })
        .collect();
    frame.insert(Variable::X, x)?;
    frame.insert(Variable::Y, y)?;
    Ok(CompleteDataset {
        kind,
        frame,
        y1,
        y0,
        true_ate: TRUE_ATE,
    })
}

/// Generates one primary-scenario dataset of size `n`.
pub fn generate_primary(kind: DgpKind, n: usize, stream: &RngStream) -> Result<CompleteDataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    if kind.is_multi() {
        return Err(Error::Argument(format!("{kind} is not a primary scenario")));
    }
    let zi = normal_column(stream, TAG_ZI, n, 0.0);
    let zp = normal_column(stream, TAG_ZP, n, 0.0);
    let zc = normal_column(stream, TAG_ZC, n, 1.0);
    let probs: Vec<f64> = zc
        .iter()
        .zip(&zi)
        .map(|(&c, &i)| primary_exposure_probability(c, i))
        .collect();
    let x = bernoulli_column(stream, &probs);
    let eps = normal_column(stream, TAG_NOISE, n, 0.0);

    let outcome = |t: f64, c: f64, p: f64, e: f64| match kind {
        DgpKind::LinearHet => 0.5 * t + c + 2.0 * p + 0.5 * t * c + e,
        DgpKind::LinearHom => t + c + 2.0 * p + e,
        _ => 0.5 * t + c + 2.0 * p * p + 0.5 * t * c + e,
    };
    let y1: Vec<f64> = (0..n).map(|i| outcome(1.0, zc[i], zp[i], eps[i])).collect();
    let y0: Vec<f64> = (0..n).map(|i| outcome(0.0, zc[i], zp[i], eps[i])).collect();

    let frame = Frame::new(n)
        .with(Variable::Zc, zc)?
        .with(Variable::Zi, zi)?
        .with(Variable::Zp, zp)?;
    assemble(kind, frame, x, y1, y0)
}

/// Generates one multiple-confounder dataset (`scenario` in 1..=3).
pub fn generate_multi(scenario: u8, n: usize, stream: &RngStream) -> Result<CompleteDataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let kind = match scenario {
        1 => DgpKind::Multi1,
        2 => DgpKind::Multi2,
        3 => DgpKind::Multi3,
        _ => {
            return Err(Error::Argument(format!(
                "multiple-confounder scenario must be 1, 2 or 3, got {scenario}"
            )))
        }
    };
    let zc1 = normal_column(stream, TAG_ZC1, n, 1.0);
    let zc2 = normal_column(stream, TAG_ZC2, n, 1.0);
    let probs: Vec<f64> = zc1
        .iter()
        .zip(&zc2)
        .map(|(&a, &b)| multi_exposure_probability(scenario, a, b))
        .collect();
    let x = bernoulli_column(stream, &probs);
    let eps = normal_column(stream, TAG_NOISE, n, 0.0);

    let quadratic_outcome = scenario != 1;
    let outcome = |t: f64, a: f64, b: f64, e: f64| {
        let f2 = if quadratic_outcome { b * b } else { b };
        0.5 * t + a + f2 + 0.5 * t * a + e
    };
    let y1: Vec<f64> = (0..n).map(|i| outcome(1.0, zc1[i], zc2[i], eps[i])).collect();
    let y0: Vec<f64> = (0..n).map(|i| outcome(0.0, zc1[i], zc2[i], eps[i])).collect();

    let frame = Frame::new(n)
        .with(Variable::Zc1, zc1)?
        .with(Variable::Zc2, zc2)?;
    assemble(kind, frame, x, y1, y0)
}

/// Dispatches to the primary or multiple-confounder generator.
pub fn generate(kind: DgpKind, n: usize, stream: &RngStream) -> Result<CompleteDataset> {
    match kind {
        DgpKind::Multi1 => generate_multi(1, n, stream),
        DgpKind::Multi2 => generate_multi(2, n, stream),
        DgpKind::Multi3 => generate_multi(3, n, stream),
        _ => generate_primary(kind, n, stream),
    }
}

/// Draws a missingness mask for `target` row by row from the MAR mechanism.
pub fn apply_missingness(
    ds: CompleteDataset,
    target: MissingTarget,
    stream: &mut RngStream,
) -> Result<ObservedDataset> {
    let mut obs = ObservedDataset::fully_observed(ds);
    let n = obs.n();
    match target {
        MissingTarget::Outcome => {
            let zc = obs.base.frame.column(obs.confounder)?.to_vec();
            obs.miss_y = (0..n)
                .map(|i| stream.bernoulli(outcome_missing_probability(zc[i])))
                .collect();
        }
        MissingTarget::Confounder => {
            let x = obs.base.frame.column(Variable::X)?.to_vec();
            obs.miss_conf = (0..n)
                .map(|i| stream.bernoulli(confounder_missing_probability(x[i])))
                .collect();
        }
    }
    Ok(obs)
}
