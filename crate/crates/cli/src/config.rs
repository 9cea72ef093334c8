//! Run configuration: command-line flags merged over an optional TOML file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use drmi::dgp::{DgpKind, MissingTarget};
use drmi::formula::ModelFormula;
use drmi::harness::{
    preset, AnalysisModels, CellConfig, PresetOptions, Strategy, DEFAULT_M, DEFAULT_NS,
    DEFAULT_REPS, DEFAULT_SEED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
}

/// Flag values; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub preset: Option<String>,
    pub cells: Option<PathBuf>,
    pub reps: Option<usize>,
    pub m: Option<usize>,
    pub ns: Vec<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    name: Option<String>,
    preset: Option<String>,
    seed: Option<u64>,
    reps: Option<usize>,
    m: Option<usize>,
    n: Option<Vec<usize>>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    formats: Option<Vec<Format>>,
    #[serde(default)]
    cells: Vec<FileCell>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCell {
    dgp: String,
    missing_target: String,
    strategy: String,
    n: Option<OneOrMany>,
    reps: Option<usize>,
    m: Option<usize>,
    table: Option<String>,
    panel: Option<String>,
    ps_formula: Option<String>,
    outcome_formula: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub cells: Vec<CellConfig>,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
}

fn read_file(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

/// Merges flags over the config file and expands the cell list.
pub fn resolve(flags: Overrides, env_threads: Option<&str>) -> Result<RunConfig, String> {
    let file = match &flags.cells {
        Some(path) => read_file(path)?,
        None => FileConfig::default(),
    };
    let preset_name = flags.preset.clone().or(file.preset.clone());
    match (&preset_name, file.cells.is_empty()) {
        (Some(_), false) => {
            return Err("give either a preset or a list of cells, not both".into());
        }
        (None, true) => {
            return Err("nothing to run: pass --preset or a --cells file with [[cells]]".into());
        }
        _ => {}
    }

    let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let global_reps = flags.reps.or(file.reps);
    let global_m = flags.m.or(file.m);
    let global_ns = if flags.ns.is_empty() { file.n.clone() } else { Some(flags.ns.clone()) };

    let threads = match flags.threads.or(file.threads) {
        Some(t) => t,
        None => match env_threads {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| format!("DRMI_THREADS must be a non-negative integer, got `{v}`"))?,
            None => 0,
        },
    };
    let out_dir = flags
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("results"));
    let mut formats = if flags.formats.is_empty() {
        file.formats.unwrap_or_else(|| vec![Format::Csv, Format::Markdown])
    } else {
        flags.formats
    };
    formats.sort();
    formats.dedup();

    let (name, cells) = if let Some(p) = preset_name {
        let options = PresetOptions {
            reps: global_reps.unwrap_or(DEFAULT_REPS),
            m: global_m.unwrap_or(DEFAULT_M),
            ns: global_ns.unwrap_or_else(|| DEFAULT_NS.to_vec()),
            seed,
        };
        let cells = preset(&p, &options).map_err(|e| e.to_string())?;
        (file.name.clone().unwrap_or(p), cells)
    } else {
        let name = file.name.clone().unwrap_or_else(|| {
            flags
                .cells
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into())
        });
        let mut cells = Vec::new();
        for (i, c) in file.cells.iter().enumerate() {
            let ctx = |e: String| format!("cell {}: {e}", i + 1);
            let dgp: DgpKind = parse(&c.dgp).map_err(ctx)?;
            let target: MissingTarget = parse(&c.missing_target).map_err(ctx)?;
            let strategy: Strategy = parse(&c.strategy).map_err(ctx)?;
            let mut analysis = AnalysisModels::for_scenario(dgp, strategy);
            if let Some(f) = &c.ps_formula {
                analysis.propensity = parse::<ModelFormula>(f).map_err(ctx)?;
            }
            if let Some(f) = &c.outcome_formula {
                analysis.outcome = parse::<ModelFormula>(f).map_err(ctx)?;
            }
            let ns = match &c.n {
                _ if !flags.ns.is_empty() => flags.ns.clone(),
                Some(OneOrMany::One(n)) => vec![*n],
                Some(OneOrMany::Many(ns)) => ns.clone(),
                None => file.n.clone().unwrap_or_else(|| DEFAULT_NS.to_vec()),
            };
            for n in ns {
                let mut cell = CellConfig::new(dgp, n, target, strategy);
                cell.table = c.table.clone().unwrap_or_else(|| name.clone());
                if let Some(p) = &c.panel {
                    cell.panel = p.clone();
                }
                cell.analysis = analysis.clone();
                cell.reps = flags.reps.or(c.reps).or(file.reps).unwrap_or(DEFAULT_REPS);
                cell.m = flags.m.or(c.m).or(file.m).unwrap_or(DEFAULT_M);
                cell.master_seed = seed;
                cell.validate().map_err(|e| ctx(e.to_string()))?;
                cells.push(cell);
            }
        }
        (name, cells)
    };
    for cell in &cells {
        cell.validate().map_err(|e| e.to_string())?;
    }
    Ok(RunConfig {
        name,
        cells,
        threads,
        out_dir,
        formats,
    })
}
