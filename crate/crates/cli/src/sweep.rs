//! One-axis parameter sweeps over a scenario template.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use halfspace_core::compare::{write_sweep_csv, SweepRow};
use halfspace_core::io::fmt_f64;
use halfspace_core::{lambda_star, CheckReport};
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{CliError, Result, EXIT_CHECK_FAILED, EXIT_PASS};
use crate::run::{run_verify, write_artifact};
use crate::scenario::Scenario;

/// `key=v1,v2,...`; values are JSON literals, bare words become strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (key, list) = s.split_once('=').ok_or_else(|| CliError::config(format!("axis {s:?} is not key=v1,v2,...")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::config("axis key is empty"));
        }
        let values: Vec<Value> = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
            .collect();
        if values.is_empty() {
            return Err(CliError::config(format!("axis {key} has no values")));
        }
        Ok(Self { key: key.to_string(), values })
    }
}

/// Sets `key` in `template`. A dotted key is a path from the root; a bare
/// key must occur exactly once anywhere in the document.
pub fn set_axis(template: &Value, key: &str, value: &Value) -> Result<Value> {
    let mut doc = template.clone();
    let slot = if key.contains('.') {
        let mut node = &mut doc;
        for part in key.split('.') {
            node = match node {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| CliError::config(format!("axis path {key} not found in the template")))?;
        }
        node
    } else {
        let mut paths = Vec::new();
        find_key(&doc, key, &mut Vec::new(), &mut paths);
        match paths.len() {
            0 => return Err(CliError::config(format!("axis key {key} not found in the template"))),
            1 => {}
            n => return Err(CliError::config(format!("axis key {key} occurs {n} times; use a dotted path"))),
        }
        let mut node = &mut doc;
        for step in &paths[0] {
            node = match (node, step) {
                (Value::Object(map), Step::Key(k)) => map.get_mut(k).expect("path was found"),
                (Value::Array(items), Step::Index(i)) => &mut items[*i],
                _ => unreachable!("path steps follow the document"),
            };
        }
        node
    };
    *slot = value.clone();
    Ok(doc)
}

#[derive(Clone)]
enum Step {
    Key(String),
    Index(usize),
}

fn find_key(node: &Value, key: &str, path: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
    match node {
        Value::Object(map) => {
            for (k, v) in map {
                path.push(Step::Key(k.clone()));
                if k == key {
                    out.push(path.clone());
                }
                find_key(v, key, path, out);
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                path.push(Step::Index(i));
                find_key(v, key, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

/// Outcome of one sweep cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub value: Value,
    pub status: CellStatus,
    pub reports: Vec<CheckReport>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CellStatus {
    Passed,
    CheckFailed,
    SolverFailed,
    ConfigError,
}

impl CellStatus {
    fn label(self) -> &'static str {
        match self {
            CellStatus::Passed => "passed",
            CellStatus::CheckFailed => "check_failed",
            CellStatus::SolverFailed => "solver_failed",
            CellStatus::ConfigError => "config_error",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            CellStatus::Passed => EXIT_PASS,
            CellStatus::CheckFailed => EXIT_CHECK_FAILED,
            CellStatus::SolverFailed => crate::error::EXIT_SOLVER,
            CellStatus::ConfigError => crate::error::EXIT_CONFIG,
        }
    }
}

/// Text form of an axis value used in names and CSV cells.
fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs `verify` for every axis value in parallel. Cell artifacts go to
/// `<root>/<name>/sweep/<key>=<value>/`; the summary `sweep_<key>.csv`
/// (and `comparison_<key>.csv` when comparison checks ran) to
/// `<root>/<name>/`. Cells are reported in axis order.
pub fn run_sweep(template_path: &Path, axis: &Axis, root: &Path) -> Result<Vec<Cell>> {
    let text = std::fs::read_to_string(template_path).map_err(|e| CliError::io(template_path, e))?;
    let template: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", template_path.display())))?;
    let base = Scenario::from_value(template.clone())?;
    let docs = axis.values.iter().map(|v| set_axis(&template, &axis.key, v)).collect::<Result<Vec<_>>>()?;
    let sweep_dir = root.join(&base.name);
    let leaf = axis.key.rsplit('.').next().unwrap_or(&axis.key).to_string();

    let cells: Vec<Cell> = docs
        .into_par_iter()
        .zip(axis.values.par_iter())
        .map(|(doc, value)| {
            let label = format!("{leaf}={}", value_label(value));
            let dir = sweep_dir.join("sweep").join(&label);
            let outcome = Scenario::from_value(doc).and_then(|mut sc| {
                sc.name = format!("{}_{label}", base.name);
                run_verify(&sc, &dir)
            });
            match outcome {
                Ok(reports) => {
                    let status = if reports.iter().all(|r| r.passed) { CellStatus::Passed } else { CellStatus::CheckFailed };
                    Cell { value: value.clone(), status, reports, message: None }
                }
                Err(e) => {
                    let status = match e {
                        CliError::Solver(_) => CellStatus::SolverFailed,
                        _ => CellStatus::ConfigError,
                    };
                    Cell { value: value.clone(), status, reports: Vec::new(), message: Some(e.to_string()) }
                }
            }
        })
        .collect();

    write_artifact(&sweep_dir, &format!("sweep_{leaf}.csv"), summary_csv(&leaf, &cells).as_bytes())?;
    let rows = comparison_rows(&cells);
    if !rows.is_empty() {
        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv).expect("writing to memory");
        write_artifact(&sweep_dir, &format!("comparison_{leaf}.csv"), &csv)?;
    }
    Ok(cells)
}

/// Long-format table `<key>,status,check,passed,metric,value`, one line per
/// metric; failed cells get one line carrying the error message.
pub fn summary_csv(key: &str, cells: &[Cell]) -> String {
    let mut s = format!("{key},status,check,passed,metric,value\n");
    for c in cells {
        let v = value_label(&c.value);
        let status = c.status.label();
        if let Some(msg) = &c.message {
            let _ = writeln!(s, "{v},{status},,false,error,\"{}\"", msg.replace('"', "'"));
            continue;
        }
        for r in &c.reports {
            for (k, m) in &r.metrics {
                let _ = writeln!(s, "{v},{status},{},{},{k},{}", r.check_name, r.passed, fmt_f64(*m));
            }
        }
    }
    s
}

fn comparison_rows(cells: &[Cell]) -> Vec<SweepRow> {
    cells
        .iter()
        .flat_map(|c| c.reports.iter())
        .filter(|r| r.check_name == "comparison" && r.metrics.contains_key("lambda_star"))
        .map(|r| SweepRow {
            lambda: r.get("lambda"),
            c_m: r.get("lipschitz_c"),
            // The uncapped narrow-strip constant, so the column depends on C only.
            lambda_star: lambda_star(r.get("lipschitz_c")).unwrap_or(f64::NAN),
            held: r.get("held") == 1.0,
        })
        .collect()
}

/// Worst exit code over the cells.
pub fn sweep_exit_code(cells: &[Cell]) -> u8 {
    cells.iter().map(|c| c.status).max().map_or(EXIT_PASS, CellStatus::exit_code)
}
