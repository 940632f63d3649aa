use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use isgd::network::Activation;
use isgd::theory::{circle_data, gram_limit, verify_lemmas, verify_theorem, write_theorem_csv, TheoremInstance};

use crate::config::TheoremConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub bound_held: bool,
    pub monotone: bool,
    pub lambda_min_held: Option<bool>,
    pub min_lambda: Option<f64>,
    pub max_displacement: Option<f64>,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremSummary {
    pub lambda0: f64,
    pub lambda0_std_error: f64,
    pub alpha: f64,
    pub runs: Vec<SeedResult>,
}

impl TheoremSummary {
    /// Runs where the loss bound held and, when checked, `λ_min ≥ λ0/2`.
    pub fn passing(&self) -> usize {
        self.runs.iter().filter(|r| r.bound_held && r.lambda_min_held != Some(false)).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda0 = {:e}", self.lambda0);
        let _ = writeln!(s, "lambda0_std_error = {:e}", self.lambda0_std_error);
        let _ = writeln!(s, "alpha = {:e}", self.alpha);
        let _ = writeln!(s, "passing = {}/{}", self.passing(), self.runs.len());
        let _ = writeln!(s, "seed,bound_held,monotone,lambda_min_held,min_lambda,max_displacement,final_loss");
        for r in &self.runs {
            let o = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            let b = r.lambda_min_held.map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{b},{},{},{:e}",
                r.seed,
                r.bound_held,
                r.monotone,
                o(r.min_lambda),
                o(r.max_displacement),
                r.final_loss
            );
        }
        s
    }
}

/// λ0 of the circle data from the Monte-Carlo limit Gram matrix.
pub fn circle_lambda0(n_points: usize, samples: usize) -> Result<(f64, f64)> {
    let (inputs, _) = circle_data(n_points);
    let h = gram_limit(&inputs, 2, Activation::Tanh, samples, 0)?;
    Ok((h.min_eigenvalue(), h.eigenvalue_std_error().unwrap_or(0.0)))
}

/// Exact-prox runs of the two-layer instance for every configured seed,
/// with per-seed CSVs written into `dir`.
pub fn verify(cfg: &TheoremConfig, dir: &Path) -> Result<TheoremSummary> {
    if cfg.seeds.is_empty() {
        bail!("theorem.seeds is empty");
    }
    fs::create_dir_all(dir)?;
    let (lambda0, se) = circle_lambda0(cfg.n_points, cfg.lambda0_samples)?;
    let n = cfg.n_points as f64;
    let alpha = cfg.alpha_scale * lambda0 / (n * n);
    let (inputs, labels) = circle_data(cfg.n_points);
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let inst = TheoremInstance::new(inputs.clone(), labels.clone(), 2, cfg.width, alpha, lambda0, seed)?;
        let report = verify_theorem(&inst, cfg.steps)?;
        let lemmas = if cfg.lemmas { Some(verify_lemmas(&inst, &report)?) } else { None };
        write_theorem_csv(&dir.join(format!("theorem_seed{seed}.csv")), &report, lemmas.as_ref())?;
        runs.push(SeedResult {
            seed,
            bound_held: report.bound_held,
            monotone: report.monotone,
            lambda_min_held: lemmas.as_ref().map(|l| l.lambda_min_held),
            min_lambda: lemmas.as_ref().map(|l| l.rows.iter().fold(f64::INFINITY, |m, r| m.min(r.lambda_min))),
            max_displacement: lemmas.as_ref().map(|l| l.max_displacement()),
            final_loss: report.rows.last().map_or(f64::NAN, |r| r.loss),
        });
    }
    let summary = TheoremSummary {
        lambda0,
        lambda0_std_error: se,
        alpha,
        runs,
    };
    fs::write(dir.join("theorem_summary.txt"), summary.render())?;
    Ok(summary)
}
