use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::run::{run_in, Summary};

pub struct Comparison {
    pub summaries: Vec<Summary>,
    /// Run directory names, in input order.
    pub labels: Vec<String>,
    pub csv_path: PathBuf,
    pub table: String,
}

/// Directory names for the runs, suffixed where config names collide.
fn labels(cfgs: &[ExperimentConfig]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for c in cfgs {
        *seen.entry(&c.name).or_default() += 1;
    }
    cfgs.iter()
        .enumerate()
        .map(|(i, c)| if seen[c.name.as_str()] > 1 { format!("{}_{i}", c.name) } else { c.name.clone() })
        .collect()
}

/// Runs every config under `root/<name>` and writes `comparison.csv` (loss
/// per optimizer, aligned on iteration) and `comparison.txt`.
pub fn compare(cfgs: &[ExperimentConfig], root: &Path, concurrent: bool) -> Result<Comparison> {
    if cfgs.len() < 2 {
        bail!("compare needs at least two configs, got {}", cfgs.len());
    }
    let first = &cfgs[0];
    for c in &cfgs[1..] {
        if c.problem != first.problem || c.seed != first.seed || c.batch != first.batch {
            bail!("configs `{}` and `{}` describe different problems", first.name, c.name);
        }
    }
    let labels = labels(cfgs);
    fs::create_dir_all(root)?;
    let job = |(c, l): (&ExperimentConfig, &String)| run_in(c, &root.join(l));
    let outcomes = if concurrent {
        cfgs.par_iter().zip(labels.par_iter()).map(job).collect::<Result<Vec<_>>>()?
    } else {
        cfgs.iter().zip(labels.iter()).map(job).collect::<Result<Vec<_>>>()?
    };

    let mut csv = String::from("iteration");
    for l in &labels {
        let _ = write!(csv, ",{l}");
    }
    csv.push('\n');
    let len = outcomes.iter().map(|o| o.trace.records.len()).max().unwrap_or(0);
    for i in 0..len {
        let _ = write!(csv, "{i}");
        for o in &outcomes {
            match o.trace.records.get(i) {
                Some(r) => {
                    let _ = write!(csv, ",{:e}", r.loss);
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    let csv_path = root.join("comparison.csv");
    fs::write(&csv_path, csv)?;

    let summaries: Vec<Summary> = outcomes.into_iter().map(|o| o.summary).collect();
    let table = render_table(&labels, &summaries);
    fs::write(root.join("comparison.txt"), &table)?;
    Ok(Comparison {
        summaries,
        labels,
        csv_path,
        table,
    })
}

pub fn render_table(labels: &[String], summaries: &[Summary]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
    let mut rows = vec![[
        "run".to_string(),
        "optimizer".into(),
        "status".into(),
        "initial loss".into(),
        "final loss".into(),
        "rel L2".into(),
        "iterations".into(),
    ]];
    for (l, s) in labels.iter().zip(summaries) {
        rows.push([
            l.clone(),
            s.optimizer.clone(),
            s.status().as_str().into(),
            format!("{:.3e}", s.initial_loss),
            format!("{:.3e}", s.final_loss),
            opt(s.rel_l2_error),
            s.iterations.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..7).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap()).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        }
    }
    out
}
