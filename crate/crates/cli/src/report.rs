//! Plain-text tables from the CSV files of an earlier run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::run::{RunError, RunResult};

/// Multiplier horizons shown in the report.
const REPORT_HORIZONS: [&str; 5] = ["0", "4", "8", "12", "20"];

fn table(title: &str, header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = format!("{title}\n{}\n", line(header));
    let _ = writeln!(out, "{}", "-".repeat(width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1)));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
    out
}

fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('.') || cell.contains('e') || cell.contains("NaN") || cell.contains("inf") => {
            format!("{v:.3}")
        }
        _ => cell.to_string(),
    }
}

fn read(path: &Path) -> RunResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| RunError::Other(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| RunError::Other(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| RunError::Other(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(short).collect());
    }
    Ok((header, rows))
}

fn sample_sizes(dir: &Path, prefix: &str) -> RunResult<Vec<usize>> {
    let mut ts = Vec::new();
    for entry in fs::read_dir(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })? {
        let entry = entry.map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(t) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".csv")).and_then(|t| t.parse().ok()) {
            ts.push(t);
        }
    }
    ts.sort_unstable();
    Ok(ts)
}

/// Renders every recognized file in `dir`. Fails if there is none.
pub fn render(dir: &Path) -> RunResult<String> {
    let mut out = String::new();
    for t in sample_sizes(dir, "points_T")? {
        let (h, r) = read(&dir.join(format!("points_T{t}.csv")))?;
        out += &table(&format!("Point estimates, T = {t}"), &h[1..], &drop_first(&r));
    }
    for t in sample_sizes(dir, "coverage_T")? {
        let (h, r) = read(&dir.join(format!("coverage_T{t}.csv")))?;
        out += &table(&format!("Coverage and band length, T = {t}"), &h[1..], &drop_first(&r));
    }
    let summary = dir.join("summary.csv");
    if summary.is_file() {
        let (h, r) = read(&summary)?;
        out += &table("Posterior summary", &h, &r);
    }
    let mult = dir.join("multipliers.csv");
    if mult.is_file() {
        let (h, r) = read(&mult)?;
        let keep: Vec<Vec<String>> = r.into_iter().filter(|row| REPORT_HORIZONS.contains(&row[1].as_str())).collect();
        out += &table("Multipliers", &h, &keep);
    }
    let exo = dir.join("exogeneity.csv");
    if exo.is_file() {
        let (h, r) = read(&exo)?;
        out += &table("Proxy-shock correlations", &h, &r);
    }
    if out.is_empty() {
        return Err(RunError::Other(format!("no result files found in `{}`", dir.display())));
    }
    Ok(out)
}

fn drop_first(rows: &[Vec<String>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r[1..].to_vec()).collect()
}
