//! CSV and JSON outputs. Floats are written in shortest round-trip form, so
//! identical runs produce identical bytes and every value parses back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{BaselineReport, CaseRun, ComparisonRow, RunReport, SweepRow};

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `iteration,cost` rows, iterations counted from 0.
pub fn trace_csv(costs: &[f64]) -> String {
    let mut s = String::from("iteration,cost\n");
    for (i, c) in costs.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", num(*c));
    }
    s
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<(usize, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("iteration,cost") {
        return Err(Error::Config("trace CSV must start with `iteration,cost`".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (i, c) = l.split_once(',').ok_or_else(|| Error::Config(format!("bad trace row `{l}`")))?;
            let i = i.parse().map_err(|_| Error::Config(format!("bad iteration `{i}`")))?;
            let c = c.parse().map_err(|_| Error::Config(format!("bad cost `{c}`")))?;
            Ok((i, c))
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("method,evaluations,total_evaluations,best_cost,accepted,exhaustive_ratio\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method,
            r.evaluations,
            r.total_evaluations,
            num(r.best_cost),
            r.accepted,
            num(r.exhaustive_ratio)
        );
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "qubits_per_param,total_qubits,dimension,marked,queries,total_queries,exhaustive_ratio,e_actual,position_error,accepted\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.qubits_per_param,
            r.total_qubits,
            r.dimension,
            r.marked,
            r.queries,
            r.total_queries,
            num(r.exhaustive_ratio),
            num(r.e_actual),
            num(r.position_error),
            r.accepted
        );
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// `trace.csv` (cost expectation per adaptive step), `report.json`, and in
/// surrogate mode `surrogate.params` and `training_loss.csv`.
pub fn emit_run(dir: &Path, run: &CaseRun) -> Result<Vec<PathBuf>> {
    let expectations: Vec<f64> = run.report.trace.iter().map(|s| s.expectation).collect();
    let mut written = vec![
        write(dir, "trace.csv", &trace_csv(&expectations))?,
        write(dir, "report.json", &(serde_json::to_string_pretty(&run.report)? + "\n"))?,
    ];
    if let Some(s) = &run.surrogate {
        written.push(write(dir, "surrogate.params", &s.to_params_text())?);
    }
    if let Some(t) = &run.report.training {
        written.push(write(dir, "training_loss.csv", &trace_csv(&t.loss_trace))?);
    }
    Ok(written)
}

/// `baselines.json` plus `trace_<method>.csv` with the best cost per iteration.
pub fn emit_baselines(dir: &Path, report: &BaselineReport) -> Result<Vec<PathBuf>> {
    let mut written = vec![write(dir, "baselines.json", &(serde_json::to_string_pretty(report)? + "\n"))?];
    for r in &report.runs {
        written.push(write(dir, &format!("trace_{}.csv", r.method), &trace_csv(&r.trace))?);
    }
    Ok(written)
}

pub fn read_run_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_baselines(path: &Path) -> Result<BaselineReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn emit_comparison(dir: &Path, rows: &[ComparisonRow]) -> Result<PathBuf> {
    write(dir, "comparison.csv", &comparison_csv(rows))
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<PathBuf> {
    write(dir, "sweep.csv", &sweep_csv(rows))
}
