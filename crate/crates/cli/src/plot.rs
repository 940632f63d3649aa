//! Long-format (series, x, y) export of trace files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Trace columns exported as series, all plotted on a log axis.
const METRICS: [&str; 4] = ["loss", "grad_norm", "rel_l2_error", "prox_residual"];

/// Series name of a trace: its run directory, or the file stem for a bare file.
fn series_name(path: &Path) -> String {
    let dir = path.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned());
    match (path.file_stem(), dir) {
        (Some(stem), Some(dir)) if stem == "trace" => dir,
        (Some(stem), _) => stem.to_string_lossy().into_owned(),
        _ => path.display().to_string(),
    }
}

/// Reshapes traces into `series,metric,x,y,log_y` rows. Empty cells are
/// skipped; a trace without data rows is an error.
pub fn plot_data(traces: &[PathBuf]) -> Result<String> {
    if traces.is_empty() {
        bail!("no trace files given");
    }
    let mut names: Vec<String> = traces.iter().map(|p| series_name(p)).collect();
    for i in 0..names.len() {
        if names.iter().filter(|n| **n == names[i]).count() > 1 {
            names[i] = traces[i].display().to_string();
        }
    }
    let mut out = String::from("series,metric,x,y,log_y\n");
    for (path, name) in traces.iter().zip(&names) {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = r.headers()?.clone();
        let col = |k: &str| header.iter().position(|h| h == k);
        let x = col("iteration").with_context(|| format!("{}: no iteration column", path.display()))?;
        let metrics: Vec<(&str, usize)> = METRICS.iter().filter_map(|m| col(m).map(|c| (*m, c))).collect();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
            for &(m, c) in &metrics {
                let y = rec.get(c).unwrap_or("");
                if !y.is_empty() {
                    let _ = writeln!(out, "{name},{m},{},{y},true", &rec[x]);
                }
            }
            rows += 1;
        }
        if rows == 0 {
            bail!("{} contains no records", path.display());
        }
    }
    Ok(out)
}
