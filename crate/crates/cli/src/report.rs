//! Markdown summary of a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::run::write_artifact;

/// Report files collected by [`markdown_report`].
const REPORT_FILES: [&str; 2] = ["profile_reports.json", "reports.json"];

/// A report as read back from disk; non-finite metrics were written as
/// `null`.
#[derive(Debug, Deserialize)]
struct StoredReport {
    check_name: String,
    passed: bool,
    metrics: BTreeMap<String, Option<f64>>,
    #[serde(default)]
    notes: Vec<String>,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CliError::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| REPORT_FILES.contains(&n)) {
            out.push(p);
        }
    }
    Ok(())
}

fn format_metric(v: Option<f64>) -> String {
    match v {
        Some(x) if x == x.trunc() && x.abs() < 1e9 => format!("{x}"),
        Some(x) => format!("{x:.4e}"),
        None => "n/a".into(),
    }
}

/// Builds the markdown summary of every report file below `dir`, writes it
/// to `dir/report.md` and returns it. Errors when no report is found.
pub fn markdown_report(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(CliError::config(format!("no report files under {}", dir.display())));
    }
    let mut md = String::from("# Verification report\n");
    let (mut total, mut passed) = (0, 0);
    for path in &files {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let reports: Vec<StoredReport> =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let rel = path.strip_prefix(dir).unwrap_or(path);
        let _ = writeln!(md, "\n## {}\n", rel.display());
        md.push_str("| check | result | metrics | notes |\n|---|---|---|---|\n");
        for r in &reports {
            total += 1;
            passed += usize::from(r.passed);
            let metrics: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={}", format_metric(*v))).collect();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                r.check_name,
                if r.passed { "PASS" } else { "FAIL" },
                metrics.join(", "),
                r.notes.join("; ").replace('|', "/")
            );
        }
    }
    let _ = writeln!(md, "\n**{passed} of {total} checks passed.**");
    write_artifact(dir, "report.md", md.as_bytes())?;
    Ok(md)
}
