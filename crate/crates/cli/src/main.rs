use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use drmi::harness::{markdown_report, run_grid, write_csv, CellSummary};

mod config;

use config::{resolve, Format, Overrides};

/// Run the doubly robust multiple-imputation simulation study.
#[derive(Debug, Parser)]
#[command(name = "drmi", version)]
struct Cli {
    /// Built-in grid: table1 … table6.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with run settings and/or a list of [[cells]].
    #[arg(long, value_name = "FILE")]
    cells: Option<PathBuf>,
    /// Replications per cell [default: 500].
    #[arg(long)]
    reps: Option<usize>,
    /// Imputations per replication [default: 20].
    #[arg(long)]
    m: Option<usize>,
    /// Sample size; repeat for several [default: 100 500 1000 2000].
    #[arg(long = "n", value_name = "N")]
    ns: Vec<usize>,
    /// Master seed [default: 20240928].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to DRMI_THREADS, then to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory [default: results].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Report formats to write; repeat or comma-separate [default: csv,markdown].
    #[arg(long = "format", value_enum, value_delimiter = ',')]
    formats: Vec<Format>,
}

fn summary_line(s: &CellSummary) -> String {
    let flag = if s.invalid { "  INVALID" } else { "" };
    format!(
        "{} {} n={} {} {}: est={:.3} mc_se={:.3} avg_se={:.3} cov={:.3} failures={}/{}{flag}",
        s.table, s.dgp, s.n, s.missing_target, s.strategy, s.est, s.mc_se, s.avg_se, s.coverage,
        s.failures, s.reps
    )
}

fn run(cli: Cli) -> Result<bool, String> {
    let env_threads = std::env::var("DRMI_THREADS").ok();
    let cfg = resolve(
        Overrides {
            preset: cli.preset,
            cells: cli.cells,
            reps: cli.reps,
            m: cli.m,
            ns: cli.ns,
            seed: cli.seed,
            threads: cli.threads,
            out: cli.out,
            formats: cli.formats,
        },
        env_threads.as_deref(),
    )?;

    let summaries = run_grid(&cfg.cells, cfg.threads).map_err(|e| e.to_string())?;
    for s in &summaries {
        println!("{}", summary_line(s));
    }

    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out_dir.display()))?;
    for format in &cfg.formats {
        let (ext, bytes) = match format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_csv(&summaries, &mut buf).map_err(|e| e.to_string())?;
                ("csv", buf)
            }
            Format::Markdown => ("md", markdown_report(&summaries).into_bytes()),
        };
        let path = cfg.out_dir.join(format!("{}.{ext}", cfg.name));
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(summaries.iter().any(|s| s.invalid))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: at least one cell had more than 10% failed replications");
            ExitCode::from(2)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
