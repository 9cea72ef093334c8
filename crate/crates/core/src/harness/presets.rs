use super::{AnalysisModels, CellConfig, Strategy, DEFAULT_M, DEFAULT_REPS, DEFAULT_SEED};
use crate::dgp::{DgpKind, MissingTarget};
use crate::error::{Error, Result};
use crate::imputation::StrategyName;

pub const PRESET_NAMES: [&str; 6] = ["table1", "table2", "table3", "table4", "table5", "table6"];
pub const DEFAULT_NS: [usize; 4] = [100, 500, 1000, 2000];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresetOptions {
    pub reps: usize,
    pub m: usize,
    pub ns: Vec<usize>,
    pub seed: u64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            reps: DEFAULT_REPS,
            m: DEFAULT_M,
            ns: DEFAULT_NS.to_vec(),
            seed: DEFAULT_SEED,
        }
    }
}

fn rows(name: &str, target: MissingTarget) -> (DgpKind, Vec<Strategy>) {
    use MissingTarget::*;
    use Strategy::{CompleteCase as CC, Impute as I};
    use StrategyName as S;
    match (name, target) {
        ("table1", _) => (
            DgpKind::LinearHet,
            vec![
                I(S::Correct),
                I(S::Oversaturated),
                CC,
                I(S::OmitPrecision),
                I(S::OmitExposure),
                I(if target == Confounder { S::OmitOutcome } else { S::OmitConfounder }),
                I(S::MissingInteraction),
            ],
        ),
        ("table2", _) => (
            DgpKind::LinearHom,
            vec![I(S::Correct), I(S::Oversaturated), CC, I(S::MissingInteraction)],
        ),
        ("table3", _) => {
            let mut v = vec![
                I(S::Correct),
                I(S::MisspecPrecision),
                I(S::MisspecPrecisionMissingInteraction),
            ];
            if target == Confounder {
                v.push(I(S::PrecisionLinearEverywhere));
            }
            (DgpKind::NonlinearHet, v)
        }
        (multi, _) => {
            let dgp = match multi {
                "table4" => DgpKind::Multi1,
                "table5" => DgpKind::Multi2,
                _ => DgpKind::Multi3,
            };
            (
                dgp,
                vec![
                    I(S::CorrectZc2Quadratic),
                    I(S::Oversaturated),
                    I(S::MisspecZc2Linear),
                ],
            )
        }
    }
}

/// The cells of a built-in table, in report order: confounder panel then
/// outcome panel, sample sizes ascending, rows in table order.
pub fn preset(name: &str, options: &PresetOptions) -> Result<Vec<CellConfig>> {
    if !PRESET_NAMES.contains(&name) {
        return Err(Error::Argument(format!(
            "unknown preset `{name}` (expected one of {})",
            PRESET_NAMES.join(", ")
        )));
    }
    let mut ns = options.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut cells = Vec::new();
    for target in [MissingTarget::Confounder, MissingTarget::Outcome] {
        let (dgp, strategies) = rows(name, target);
        for &n in &ns {
            for &strategy in &strategies {
                cells.push(CellConfig {
                    table: name.to_string(),
                    panel: format!("missing_{target}"),
                    dgp,
                    n,
                    missing_target: target,
                    strategy,
                    analysis: AnalysisModels::for_scenario(dgp, strategy),
                    reps: options.reps,
                    m: options.m,
                    master_seed: options.seed,
                });
            }
        }
    }
    Ok(cells)
}
