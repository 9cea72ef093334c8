use std::fmt::Write as _;
use std::io::Write;

use super::CellSummary;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 16] = [
    "table",
    "panel",
    "n",
    "dgp",
    "missing_target",
    "strategy",
    "reps",
    "m",
    "est",
    "mc_se",
    "avg_se",
    "bias",
    "rmse",
    "coverage",
    "failures",
    "seed",
];

fn num(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes one CSV row per cell, preceded by [`CSV_HEADER`].
pub fn write_csv<W: Write>(summaries: &[CellSummary], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Argument(format!("cannot write CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(err)?;
    for s in summaries {
        w.write_record([
            s.table.clone(),
            s.panel.clone(),
            s.n.to_string(),
            s.dgp.to_string(),
            s.missing_target.to_string(),
            s.strategy.to_string(),
            s.reps.to_string(),
            s.m.to_string(),
            num(s.est),
            num(s.mc_se),
            num(s.avg_se),
            num(s.bias),
            num(s.rmse),
            num(s.coverage),
            s.failures.to_string(),
            s.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Argument(format!("cannot write CSV: {e}")))
}

fn panel_title(s: &CellSummary) -> String {
    let var = match s.missing_target {
        crate::dgp::MissingTarget::Outcome => "y".to_string(),
        crate::dgp::MissingTarget::Confounder => s.dgp.missing_confounder().to_string(),
    };
    let what = match s.missing_target {
        crate::dgp::MissingTarget::Outcome => "Missing Outcome",
        crate::dgp::MissingTarget::Confounder => "Missing Confounder",
    };
    format!("{}: {what} ({var}), n = {}", s.table, s.n)
}

/// Markdown tables, one per (table, panel, n) group in input order.
pub fn markdown_report(summaries: &[CellSummary]) -> String {
    let mut out = String::new();
    let mut current: Option<String> = None;
    for s in summaries {
        let title = panel_title(s);
        if current.as_deref() != Some(title.as_str()) {
            if current.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "### {title}\n");
            out.push_str(
                "| Model | Est. | MC SE | Avg. SE | Bias | RMSE | 95% Cov. | Failures |\n\
                 |---|---:|---:|---:|---:|---:|---:|---:|\n",
            );
            current = Some(title);
        }
        let flag = if s.invalid { " (invalid)" } else { "" };
        let _ = writeln!(
            out,
            "| {}{flag} | {:.2} | {:.2} ± {:.3} | {:.2} | {:.2} | {:.2} | {:.2} | {}/{} |",
            s.strategy.label(s.dgp),
            s.est,
            s.mc_se,
            s.mc_se_error(),
            s.avg_se,
            s.bias,
            s.rmse,
            s.coverage,
            s.failures,
            s.reps,
        );
    }
    out
}
