use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use isgd::autodiff::ParamVector;
use isgd::diagnostics::{hessian_spectrum, rel_l2_error, SpectrumMethod, SpectrumReport};
use isgd::network::Checkpoint;
use isgd::optimizers::{train_recorded, CsvSink, ErrorMonitor, OptimizerSpec, Phase, Recorder, TrainingTrace};
use isgd::problems::{Batch, Objective, Problem};

use crate::config::ExperimentConfig;

/// Outcome class of a finished run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Diverged,
    /// Final loss at most 1e-2 of the initial loss.
    Converged,
    Stalled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Diverged => "diverged",
            Status::Converged => "converged",
            Status::Stalled => "stalled",
        }
    }
}

pub const CONVERGED_FRACTION: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub name: String,
    pub problem: String,
    pub optimizer: String,
    pub parameters: usize,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub tail_iterations: usize,
    pub initial_loss: f64,
    /// Full-batch loss at the returned parameters (last recorded loss after
    /// a divergence).
    pub final_loss: f64,
    pub rel_l2_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub lambda_max: Option<f64>,
    pub diverged: bool,
    pub note: Option<String>,
    pub elapsed_seconds: f64,
}

impl Summary {
    pub fn status(&self) -> Status {
        if self.diverged {
            Status::Diverged
        } else if self.final_loss <= CONVERGED_FRACTION * self.initial_loss {
            Status::Converged
        } else {
            Status::Stalled
        }
    }

    /// `key = value` lines.
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(s, "optimizer = {}", self.optimizer);
        let _ = writeln!(s, "parameters = {}", self.parameters);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "outer_iterations = {}", self.outer_iterations);
        let _ = writeln!(s, "tail_iterations = {}", self.tail_iterations);
        let _ = writeln!(s, "initial_loss = {:e}", self.initial_loss);
        let _ = writeln!(s, "final_loss = {:e}", self.final_loss);
        let _ = writeln!(s, "rel_l2_error = {}", opt(self.rel_l2_error));
        let _ = writeln!(s, "max_abs_error = {}", opt(self.max_abs_error));
        let _ = writeln!(s, "lambda_max = {}", opt(self.lambda_max));
        let _ = writeln!(s, "diverged = {}", self.diverged);
        let _ = writeln!(s, "status = {}", self.status().as_str());
        let _ = writeln!(s, "note = {}", self.note.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "elapsed_seconds = {:.3}", self.elapsed_seconds);
        s
    }
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
    pub trace: TrainingTrace,
    pub theta: ParamVector,
    /// Spectra keyed by snapshot iteration (`None` for the final point).
    pub spectra: Vec<(Option<usize>, SpectrumReport)>,
}

pub fn optimizer_label(spec: &OptimizerSpec) -> String {
    match spec {
        OptimizerSpec::Sgd { lr, .. } => format!("sgd(lr={lr})"),
        OptimizerSpec::Adam { lr, .. } => format!("adam(lr={lr})"),
        OptimizerSpec::Lbfgs { .. } => "lbfgs".into(),
        OptimizerSpec::Isgd(c) => format!("isgd(alpha={})", c.alpha),
    }
}

/// Trains the configured experiment and writes its artifacts into `dir`.
pub fn run_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let (problem, theta0) = cfg.build()?;
    if cfg.diagnostics.export_dataset && problem.network().is_some() {
        problem.write_dataset(&dir.join("dataset.csv"))?;
    }

    let mut sink = CsvSink::create(&dir.join("trace.csv"))?;
    let eval = |t: &ParamVector| rel_l2_error(&problem, t).map(|e| e.rel_l2);
    let monitor = (cfg.diagnostics.error_every > 0 && problem.has_exact()).then(|| ErrorMonitor {
        every: cfg.diagnostics.error_every,
        eval: &eval,
    });
    let mut snapshots = cfg.diagnostics.spectrum_at.clone();
    if cfg.diagnostics.spectrum.is_none() {
        snapshots.clear();
    }
    let rec = Recorder::new(&mut sink, monitor).with_snapshots(&snapshots);
    let (theta, trace) = train_recorded(&problem, &theta0, &cfg.optimizer, rec)?;

    if let Some(net) = problem.network() {
        Checkpoint::new(net, &theta).save(&dir.join("checkpoint.json"))?;
    }

    let mut spectra = Vec::new();
    if let Some(method) = cfg.diagnostics.spectrum {
        for (it, t) in &trace.snapshots {
            let r = hessian_spectrum(&problem, t, method)?;
            r.write_csv(&dir.join(format!("spectrum_{it}.csv")))?;
            spectra.push((Some(*it), r));
        }
        if !trace.diverged {
            let r = hessian_spectrum(&problem, &theta, method)?;
            r.write_csv(&dir.join("spectrum_final.csv"))?;
            spectra.push((None, r));
        }
    }

    let summary = summarize(cfg, &problem, &theta, &trace, &spectra)?;
    fs::write(dir.join("summary.txt"), summary.render())?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        summary,
        trace,
        theta,
        spectra,
    })
}

/// [`run_in`] at the configured output location.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_in(cfg, &cfg.output_path())
}

fn summarize(
    cfg: &ExperimentConfig,
    problem: &Problem,
    theta: &ParamVector,
    trace: &TrainingTrace,
    spectra: &[(Option<usize>, SpectrumReport)],
) -> Result<Summary> {
    let last = trace.records.last();
    let initial_loss = trace.records.first().map_or(f64::NAN, |r| r.loss);
    let final_loss = if trace.diverged {
        last.map_or(f64::NAN, |r| r.loss)
    } else {
        problem.loss(theta, &Batch::Full)?
    };
    let error = if problem.has_exact() && theta.is_finite() {
        Some(rel_l2_error(problem, theta)?)
    } else {
        None
    };
    Ok(Summary {
        name: cfg.name.clone(),
        problem: problem.name().to_string(),
        optimizer: optimizer_label(&cfg.optimizer),
        parameters: theta.len(),
        iterations: trace.records.len(),
        outer_iterations: trace.phase(Phase::Isgd).count(),
        tail_iterations: trace.phase(Phase::Tail).count(),
        initial_loss,
        final_loss,
        rel_l2_error: error.map(|e| e.rel_l2),
        max_abs_error: error.map(|e| e.max_abs),
        lambda_max: spectra.iter().find(|(it, _)| it.is_none()).map(|(_, r)| r.lambda_max()),
        diverged: trace.diverged,
        note: trace.note.clone(),
        elapsed_seconds: last.map_or(0.0, |r| r.elapsed_seconds),
    })
}

/// Spectrum of a saved checkpoint on the configured problem.
pub fn checkpoint_spectrum(cfg: &ExperimentConfig, checkpoint: &Path, method: Option<SpectrumMethod>) -> Result<SpectrumReport> {
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let (net, theta) = ck.restore()?;
    if Some(net.config()) != cfg.network_config().as_ref() {
        anyhow::bail!("checkpoint network does not match the config's network section");
    }
    let problem = cfg.problem_with(net)?;
    let method = method.or(cfg.diagnostics.spectrum).unwrap_or(SpectrumMethod::Dense);
    Ok(hessian_spectrum(&problem, &theta, method)?)
}
