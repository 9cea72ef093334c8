//! Monte Carlo simulation cells, grids and reports.
//!
//! A cell is one (scenario, sample size, missing variable, strategy)
//! combination. Each replication generates a dataset, masks it, imputes it
//! `m` times, estimates on every completion and pools. Replications run in
//! parallel but every random draw comes from a stream keyed by the cell and
//! replication index, and results are aggregated in replication order, so
//! output does not depend on thread count or scheduling.

mod presets;
mod report;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Variable;
use crate::dgp::{apply_missingness, generate, DgpKind, MissingTarget, ObservedDataset, TRUE_ATE};
use crate::error::{Error, Result};
use crate::estimators::{aipw_estimate, EstimateWithVariance};
use crate::formula::{ModelFormula, Term};
use crate::imputation::{complete_case, impute_multiple, ImputationStrategy, StrategyName};
use crate::numerics::rng::fnv1a;
use crate::numerics::{RngStream, SeedMaterial};
use crate::pooling::{pool_rubin, single_estimate, PooledResult};

pub use presets::{preset, PresetOptions, DEFAULT_NS, PRESET_NAMES};
pub use report::{markdown_report, write_csv, CSV_HEADER};

pub const DEFAULT_REPS: usize = 500;
pub const DEFAULT_M: usize = 20;
pub const DEFAULT_SEED: u64 = 20240928;
pub const CONFIDENCE: f64 = 0.95;
/// Cells with more than this fraction of failed replications are flagged invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

const PURPOSE_DATA: u64 = 1;
const PURPOSE_MISSINGNESS: u64 = 2;
const PURPOSE_IMPUTATION: u64 = 3;

/// How missing values are handled in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Impute(StrategyName),
    CompleteCase,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Impute(s) => s.name(),
            Strategy::CompleteCase => "complete_case",
        }
    }

    /// Row label used in Markdown reports.
    pub fn label(self, dgp: DgpKind) -> &'static str {
        use StrategyName as S;
        match self {
            Strategy::CompleteCase => "Complete Case Analysis",
            Strategy::Impute(s) => match s {
                S::Correct if dgp == DgpKind::NonlinearHet => "Correct Nonlinear Imputation Model",
                S::Correct => "Correct Imputation Model",
                S::CorrectZc2Quadratic => "Correct Imputation Model",
                S::Oversaturated => "Oversaturated Imputation Model",
                S::OmitPrecision => "Omits Precision Variable",
                S::OmitExposure => "Omits Exposure",
                S::OmitOutcome => "Omits Outcome",
                S::OmitConfounder => "Omits Confounder",
                S::MissingInteraction => "Missing Interaction",
                S::MisspecPrecision => "Misspecified Precision Variable",
                S::MisspecPrecisionMissingInteraction => {
                    "Misspecified Precision Variable, Missing Interaction"
                }
                S::PrecisionLinearEverywhere => {
                    "Precision Variable Linear in both Imputation and Analysis Model"
                }
                S::MisspecZc2Linear => "Misspecified Confounder (zc2)",
            },
        }
    }

    pub fn all_names() -> Vec<&'static str> {
        let mut names: Vec<&'static str> = StrategyName::ALL.iter().map(|s| s.name()).collect();
        names.push("complete_case");
        names
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "complete_case" {
            return Ok(Strategy::CompleteCase);
        }
        s.parse::<StrategyName>().map(Strategy::Impute).map_err(|_| {
            Error::Parse(format!(
                "unknown strategy `{s}` (expected one of {})",
                Strategy::all_names().join(", ")
            ))
        })
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

/// Propensity and outcome formulas of the analysis model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisModels {
    pub propensity: ModelFormula,
    pub outcome: ModelFormula,
}

impl AnalysisModels {
    /// The analysis models used for `dgp` under `strategy`.
    pub fn for_scenario(dgp: DgpKind, strategy: Strategy) -> AnalysisModels {
        use Variable::{Zc, Zc1, Zc2, Zp, X, Y};
        let lin = Term::linear;
        let formula = |response, terms| {
            ModelFormula::new(response, terms).expect("built-in formulas are valid")
        };
        let (ps, out) = match dgp {
            DgpKind::LinearHet | DgpKind::LinearHom => {
                (vec![lin(Zc)], vec![lin(Zc), lin(Zp)])
            }
            DgpKind::NonlinearHet => {
                let precision = if strategy == Strategy::Impute(StrategyName::PrecisionLinearEverywhere) {
                    lin(Zp)
                } else {
                    Term::square(Zp)
                };
                (vec![lin(Zc)], vec![lin(Zc), precision])
            }
            DgpKind::Multi1 => (
                vec![lin(Zc1), Term::square(Zc2)],
                vec![lin(Zc1), lin(Zc2)],
            ),
            DgpKind::Multi2 => (
                vec![lin(Zc1), lin(Zc2)],
                vec![lin(Zc1), Term::square(Zc2)],
            ),
            DgpKind::Multi3 => (
                vec![lin(Zc1), Term::square(Zc2)],
                vec![lin(Zc1), Term::square(Zc2)],
            ),
        };
        AnalysisModels {
            propensity: formula(X, ps),
            outcome: formula(Y, out)
                .stratified()
                .expect("outcome formulas never use x"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// Report grouping labels; they do not affect any random draw.
    pub table: String,
    pub panel: String,
    pub dgp: DgpKind,
    pub n: usize,
    pub missing_target: MissingTarget,
    pub strategy: Strategy,
    pub analysis: AnalysisModels,
    pub reps: usize,
    pub m: usize,
    pub master_seed: u64,
}

impl CellConfig {
    /// A cell with the default analysis models, reps, m and seed.
    pub fn new(dgp: DgpKind, n: usize, missing_target: MissingTarget, strategy: Strategy) -> Self {
        Self {
            table: "custom".into(),
            panel: format!("missing_{missing_target}"),
            dgp,
            n,
            missing_target,
            strategy,
            analysis: AnalysisModels::for_scenario(dgp, strategy),
            reps: DEFAULT_REPS,
            m: DEFAULT_M,
            master_seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Argument("n must be at least 1".into()));
        }
        if self.reps < 2 {
            return Err(Error::Argument(format!("reps must be at least 2, got {}", self.reps)));
        }
        if self.m < 2 {
            return Err(Error::Argument(format!("m must be at least 2, got {}", self.m)));
        }
        if self.analysis.propensity.response != Variable::X
            || self.analysis.outcome.response != Variable::Y
        {
            return Err(Error::Argument(
                "analysis models must be x ~ ... and y ~ ...".into(),
            ));
        }
        self.imputation().map(|_| ())
    }

    /// The resolved imputation strategy, or `None` for complete-case cells.
    pub fn imputation(&self) -> Result<Option<ImputationStrategy>> {
        match self.strategy {
            Strategy::CompleteCase => Ok(None),
            Strategy::Impute(name) => {
                ImputationStrategy::resolve(name, self.dgp, self.missing_target).map(Some)
            }
        }
    }

    /// Identity of the generated data; shared by every strategy on the same scenario.
    pub fn scenario_id(&self) -> u64 {
        fnv1a(format!("{}|{}|{}", self.dgp, self.n, self.missing_target).as_bytes())
    }

    /// Identity of the imputation draws.
    pub fn cell_id(&self) -> u64 {
        fnv1a(
            format!(
                "{}|{}|{}|{}",
                self.dgp, self.n, self.missing_target, self.strategy
            )
            .as_bytes(),
        )
    }

    fn stream(&self, cell: u64, rep: usize, purpose: u64) -> RngStream {
        RngStream::new(SeedMaterial {
            master: self.master_seed,
            cell,
            replication: rep as u64,
            purpose,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplicationOptions {
    /// Skip the missingness mechanism, leaving every value observed.
    pub suppress_missingness: bool,
}

/// The observed dataset of replication `rep`.
pub fn replication_data(
    cell: &CellConfig,
    rep: usize,
    options: ReplicationOptions,
) -> Result<ObservedDataset> {
    let data = generate(cell.dgp, cell.n, &cell.stream(cell.scenario_id(), rep, PURPOSE_DATA))?;
    if options.suppress_missingness {
        return Ok(ObservedDataset::fully_observed(data));
    }
    let mut miss = cell.stream(cell.scenario_id(), rep, PURPOSE_MISSINGNESS);
    apply_missingness(data, cell.missing_target, &mut miss)
}

/// Per-completion estimates of replication `rep` (one entry for complete case).
pub fn replication_estimates(
    cell: &CellConfig,
    rep: usize,
    options: ReplicationOptions,
) -> Result<Vec<EstimateWithVariance>> {
    let observed = replication_data(cell, rep, options)?;
    let models = &cell.analysis;
    match cell.imputation()? {
        None => {
            let frame = complete_case(&observed)?;
            Ok(vec![aipw_estimate(&frame, &models.propensity, &models.outcome)?])
        }
        Some(strategy) => {
            let stream = cell.stream(cell.cell_id(), rep, PURPOSE_IMPUTATION);
            impute_multiple(&observed, &strategy, cell.m, &stream)?
                .iter()
                .map(|c| aipw_estimate(&c.frame, &models.propensity, &models.outcome))
                .collect()
        }
    }
}

pub fn run_replication(cell: &CellConfig, rep: usize) -> Result<PooledResult> {
    run_replication_with(cell, rep, ReplicationOptions::default())
}

pub fn run_replication_with(
    cell: &CellConfig,
    rep: usize,
    options: ReplicationOptions,
) -> Result<PooledResult> {
    let estimates = replication_estimates(cell, rep, options)?;
    match cell.strategy {
        Strategy::CompleteCase => single_estimate(&estimates[0], CONFIDENCE),
        Strategy::Impute(_) => pool_rubin(&estimates, CONFIDENCE),
    }
}

/// Aggregated metrics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub table: String,
    pub panel: String,
    pub dgp: DgpKind,
    pub n: usize,
    pub missing_target: MissingTarget,
    pub strategy: Strategy,
    pub reps: usize,
    pub m: usize,
    pub seed: u64,
    pub est: f64,
    pub mc_se: f64,
    pub avg_se: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    /// Coverage with normal quantiles in place of t quantiles.
    pub coverage_normal: f64,
    pub failures: usize,
    /// More than [`MAX_FAILURE_FRACTION`] of replications failed.
    pub invalid: bool,
    /// Message of the first failed replication, if any.
    pub first_failure: Option<String>,
}

impl CellSummary {
    pub fn successes(&self) -> usize {
        self.reps - self.failures
    }

    /// Approximate Monte Carlo standard error of `mc_se`.
    pub fn mc_se_error(&self) -> f64 {
        self.mc_se / (2.0 * (self.successes() as f64 - 1.0)).sqrt()
    }

    /// Aggregates replication results given in replication order.
    pub fn from_results(cell: &CellConfig, results: &[Result<PooledResult>]) -> CellSummary {
        let ok: Vec<&PooledResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failures = results.len() - ok.len();
        let first_failure = results
            .iter()
            .find_map(|r| r.as_ref().err())
            .map(|e| e.to_string());
        let k = ok.len() as f64;
        let mean = |f: &dyn Fn(&PooledResult) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / k;
        let est = mean(&|r| r.delta_bar);
        let mc_se = if ok.len() >= 2 {
            (ok.iter().map(|r| (r.delta_bar - est).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        let frac = |hit: &dyn Fn(&PooledResult) -> bool| {
            ok.iter().filter(|r| hit(r)).count() as f64 / k
        };
        let coverage_normal = frac(&|r| {
            r.normal_interval(CONFIDENCE)
                .map(|(lo, hi)| lo <= TRUE_ATE && TRUE_ATE <= hi)
                .unwrap_or(false)
        });
        CellSummary {
            table: cell.table.clone(),
            panel: cell.panel.clone(),
            dgp: cell.dgp,
            n: cell.n,
            missing_target: cell.missing_target,
            strategy: cell.strategy,
            reps: results.len(),
            m: cell.m,
            seed: cell.master_seed,
            est,
            mc_se,
            avg_se: mean(&|r| r.se()),
            bias: est - TRUE_ATE,
            rmse: mean(&|r| (r.delta_bar - TRUE_ATE).powi(2)).sqrt(),
            coverage: frac(&|r| r.covers(TRUE_ATE)),
            coverage_normal,
            failures,
            invalid: ok.len() < 2 || failures as f64 > MAX_FAILURE_FRACTION * results.len() as f64,
            first_failure,
        }
    }
}

fn with_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Argument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_cell_here(cell: &CellConfig) -> CellSummary {
    let results: Vec<Result<PooledResult>> = (0..cell.reps)
        .into_par_iter()
        .map(|rep| run_replication(cell, rep))
        .collect();
    CellSummary::from_results(cell, &results)
}

/// Runs every replication of `cell` on up to `parallelism` threads
/// (0 lets the thread pool choose).
pub fn run_cell(cell: &CellConfig, parallelism: usize) -> Result<CellSummary> {
    cell.validate()?;
    with_pool(parallelism, || run_cell_here(cell))
}

/// Runs `cells` and returns their summaries in input order.
pub fn run_grid(cells: &[CellConfig], parallelism: usize) -> Result<Vec<CellSummary>> {
    for cell in cells {
        cell.validate()?;
    }
    with_pool(parallelism, || cells.par_iter().map(run_cell_here).collect())
}
