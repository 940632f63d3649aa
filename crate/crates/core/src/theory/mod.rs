//! Empirical checks of the two-layer convergence theory: Gram matrices,
//! their Monte-Carlo limit, and the linear-rate bound along exact implicit
//! trajectories.

mod gram;

pub use gram::{gram_empirical, gram_limit, GramMatrix, GramSource};

use std::io::Write;
use std::path::Path;

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{build, Activation, InitScheme, NetworkConfig};
use crate::optimizers::{lbfgs_minimize, LbfgsOptions};
use crate::problems::{Batch, Objective, Problem, Reduction};

/// Largest `|cos|` between two inputs still counted as non-parallel.
pub const PARALLEL_TOLERANCE: f64 = 1.0 - 1e-6;

/// Data and hyper-parameters of one run of the convergence theorem.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremInstance {
    /// `N × dim`, row-major.
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    pub dim: usize,
    pub m: usize,
    pub alpha: f64,
    /// Nominal failure probability; recorded, not used.
    pub delta: f64,
    /// Estimate of `λ_min(H∞)`.
    pub lambda0: f64,
    /// Initialization seed of the network.
    pub seed: u64,
}

impl TheoremInstance {
    pub fn new(
        inputs: Vec<f64>,
        labels: Vec<f64>,
        dim: usize,
        m: usize,
        alpha: f64,
        lambda0: f64,
        seed: u64,
    ) -> Result<Self> {
        let inst = Self {
            inputs,
            labels,
            dim,
            m,
            alpha,
            delta: 0.1,
            lambda0,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.inputs.len() != self.n() * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.n() * self.dim,
                got: self.inputs.len(),
            });
        }
        if self.m == 0 || !(self.alpha >= 0.0) {
            return Err(Error::InvalidConfig("need m ≥ 1 and α ≥ 0".into()));
        }
        let xs: Vec<&[f64]> = self.inputs.chunks(self.dim).collect();
        for (i, a) in xs.iter().enumerate() {
            let na = dot(a, a).sqrt();
            if na == 0.0 {
                return Err(Error::InvalidConfig(format!("input {i} is zero")));
            }
            for (j, b) in xs.iter().enumerate().skip(i + 1) {
                let cos = dot(a, b) / (na * dot(b, b).sqrt());
                if cos.abs() >= PARALLEL_TOLERANCE {
                    return Err(Error::InvalidConfig(format!("inputs {i} and {j} are parallel")));
                }
            }
        }
        Ok(())
    }

    /// Two-layer tanh network with `w_r ~ N(0, I)`, fixed `a_r = ±1`, and
    /// the loss `Σ ½ (y_i − u_i)²`.
    pub fn build(&self) -> Result<(Problem, ParamVector)> {
        let cfg = NetworkConfig::two_layer(self.dim, self.m, Activation::Tanh);
        let (net, theta) = build(cfg, InitScheme::theorem(self.seed))?;
        let p = Problem::regression_data(net, self.inputs.clone(), self.labels.clone(), Reduction::HalfSum)?;
        Ok((p, theta))
    }
}

/// `n` unit vectors in the plane at angles `kπ/n`, with labels
/// `sin(3·angle)`.
pub fn circle_data(n: usize) -> (Vec<f64>, Vec<f64>) {
    let angles: Vec<f64> = (0..n).map(|k| std::f64::consts::PI * k as f64 / n as f64).collect();
    let inputs = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
    let labels = angles.iter().map(|a| (3.0 * a).sin()).collect();
    (inputs, labels)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremRow {
    pub iteration: usize,
    pub loss: f64,
    /// `(1 + αλ0/2)^{-n} L(0)`
    pub bound: f64,
    /// `bound − loss`; negative where the bound fails.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub rows: Vec<TheoremRow>,
    pub bound_held: bool,
    pub monotone: bool,
    /// `θ_0 … θ_K`.
    pub trajectory: Vec<ParamVector>,
}

/// Inner tolerance on `‖∇G‖` for the proximal subproblems.
pub const PROX_TOLERANCE: f64 = 1e-10;

/// Runs `k` implicit steps with tightly solved proximal subproblems and
/// compares the loss against the linear-rate bound.
pub fn verify_theorem(inst: &TheoremInstance, k: usize) -> Result<TheoremReport> {
    inst.validate()?;
    let (problem, theta0) = inst.build()?;
    let opts = LbfgsOptions {
        max_iters: 1000,
        tolerance: PROX_TOLERANCE,
        ..Default::default()
    };
    let rate = 1.0 / (1.0 + inst.alpha * inst.lambda0 / 2.0);
    let l0 = problem.loss(&theta0, &Batch::Full)?;
    let mut rows = vec![TheoremRow {
        iteration: 0,
        loss: l0,
        bound: l0,
        margin: 0.0,
    }];
    let mut trajectory = vec![theta0];
    for n in 1..=k {
        let center = trajectory.last().unwrap().clone();
        let g = |x: &ParamVector| {
            let (l, g) = problem.loss_and_grad(x, &Batch::Full)?;
            let d = x.sub(&center)?;
            Ok((0.5 * d.dot(&d)? + inst.alpha * l, d.axpy(inst.alpha, &g)?))
        };
        let r = lbfgs_minimize(g, &center, &opts)?;
        if !r.converged {
            return Err(Error::InnerSolveFailed {
                iteration: n,
                reason: format!("‖∇G‖ = {:e} after {} iterations", r.grad_norm, r.iterations),
            });
        }
        let loss = problem.loss(&r.theta, &Batch::Full)?;
        let bound = rate.powi(n as i32) * l0;
        rows.push(TheoremRow {
            iteration: n,
            loss,
            bound,
            margin: bound - loss,
        });
        trajectory.push(r.theta);
    }
    let bound_held = rows.iter().all(|r| r.loss <= r.bound);
    let monotone = rows.windows(2).all(|w| w[1].loss <= w[0].loss);
    Ok(TheoremReport {
        rows,
        bound_held,
        monotone,
        trajectory,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaRow {
    pub iteration: usize,
    /// `max_r ‖w_r(s) − w_r(0)‖₂`
    pub max_displacement: f64,
    /// `‖H(s) − H(0)‖₂`
    pub gram_change: f64,
    pub lambda_min: f64,
    /// `‖I_0(s)‖₂` with `I_0(s) = (y − u(s−1)) − (I + αH(s))(y − u(s))`.
    pub i0_norm: f64,
    /// `(αλ0/8)‖y − u(s)‖₂`
    pub i0_bound: f64,
}

#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    /// `λ_min(H(s)) ≥ λ0/2` for every `s`.
    pub lambda_min_held: bool,
    /// `‖H(s) − H(0)‖₂ ≤ λ0/4` for every `s`.
    pub gram_change_held: bool,
    /// `‖I_0(s)‖₂ ≤ (αλ0/8)‖y − u(s)‖₂` for every `s ≥ 1`.
    pub i0_held: bool,
}

impl LemmaReport {
    pub fn max_displacement(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.max_displacement))
    }
}

/// Lemma quantities along a recorded trajectory.
pub fn verify_lemmas(inst: &TheoremInstance, report: &TheoremReport) -> Result<LemmaReport> {
    let (problem, _) = inst.build()?;
    let net = problem.network().ok_or(Error::Missing("network"))?;
    let n = inst.n();
    let d = inst.dim;
    let Some(theta0) = report.trajectory.first() else {
        return Err(Error::Missing("trajectory"));
    };
    let h0 = gram_empirical(net, theta0, &inst.inputs)?;
    let mut rows = Vec::with_capacity(report.trajectory.len());
    let mut prev_err: Option<Vec<f64>> = None;
    for (s, theta) in report.trajectory.iter().enumerate() {
        let h = gram_empirical(net, theta, &inst.inputs)?;
        let diff: Vec<f64> = h.entries.iter().zip(&h0.entries).map(|(a, b)| a - b).collect();
        let disp = theta
            .as_slice()
            .chunks(d)
            .zip(theta0.as_slice().chunks(d))
            .map(|(w, w0)| w.iter().zip(w0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let u = net.forward_batch(theta, &inst.inputs)?;
        let err: Vec<f64> = inst.labels.iter().zip(&u).map(|(y, u)| y - u).collect();
        let err_norm = dot(&err, &err).sqrt();
        let i0_norm = match &prev_err {
            None => 0.0,
            Some(prev) => {
                let i0: Vec<f64> = (0..n)
                    .map(|i| {
                        let he: f64 = (0..n).map(|j| h.get(i, j) * err[j]).sum();
                        prev[i] - (err[i] + inst.alpha * he)
                    })
                    .collect();
                dot(&i0, &i0).sqrt()
            }
        };
        rows.push(LemmaRow {
            iteration: s,
            max_displacement: disp,
            gram_change: linalg::sym_norm2(n, &diff),
            lambda_min: h.min_eigenvalue(),
            i0_norm,
            i0_bound: inst.alpha * inst.lambda0 / 8.0 * err_norm,
        });
        prev_err = Some(err);
    }
    let lambda_min_held = rows.iter().all(|r| r.lambda_min >= inst.lambda0 / 2.0);
    let gram_change_held = rows.iter().all(|r| r.gram_change <= inst.lambda0 / 4.0);
    let i0_held = rows.iter().skip(1).all(|r| r.i0_norm <= r.i0_bound);
    Ok(LemmaReport {
        rows,
        lambda_min_held,
        gram_change_held,
        i0_held,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Writes the per-iteration theorem (and optionally lemma) quantities.
pub fn write_theorem_csv(path: &Path, report: &TheoremReport, lemmas: Option<&LemmaReport>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "iteration,loss,bound,margin")?;
    if lemmas.is_some() {
        write!(f, ",max_displacement,gram_change,lambda_min,i0_norm,i0_bound")?;
    }
    writeln!(f)?;
    for (i, r) in report.rows.iter().enumerate() {
        write!(f, "{},{:e},{:e},{:e}", r.iteration, r.loss, r.bound, r.margin)?;
        if let Some(l) = lemmas {
            let q = &l.rows[i];
            write!(
                f,
                ",{:e},{:e},{:e},{:e},{:e}",
                q.max_displacement, q.gram_change, q.lambda_min, q.i0_norm, q.i0_bound
            )?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
