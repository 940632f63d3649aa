//! Implicit (stochastic) gradient descent by inexact proximal steps.
//!
//! Each outer iteration approximately solves
//! `θ_{n+1} = argmin_θ̃ ½‖θ̃ − θ_n‖² + α·L(θ̃)`, whose stationarity condition
//! is the implicit update `θ_{n+1} = θ_n − α∇L(θ_{n+1})`. The inner solver is
//! warm-started at `θ_n`, gets a fresh state every outer iteration, and sees a
//! batch that stays fixed for the whole subproblem. A plain optimizer on `L`
//! finishes the run.

use serde::{Deserialize, Serialize};

use super::adam::{AdamParams, AdamState};
use super::lbfgs::{lbfgs_minimize, LbfgsOptions};
use super::trace::{is_divergent, Phase, Recorder};
use super::train::{run_plain, Stepper};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::problems::{Batch, Objective};

pub const DEFAULT_K1: usize = 50;

fn default_k1() -> usize {
    DEFAULT_K1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InnerSolver {
    Adam {
        lr: f64,
        #[serde(default = "default_k1")]
        k1: usize,
    },
    Lbfgs {
        #[serde(default = "default_k1")]
        k1: usize,
    },
}

impl InnerSolver {
    pub fn k1(&self) -> usize {
        match *self {
            InnerSolver::Adam { k1, .. } | InnerSolver::Lbfgs { k1 } => k1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TailSpec {
    Adam {
        lr: f64,
        k2: usize,
    },
    Lbfgs {
        k2: usize,
    },
    #[default]
    None,
}

impl TailSpec {
    pub fn k2(&self) -> usize {
        match *self {
            TailSpec::Adam { k2, .. } | TailSpec::Lbfgs { k2 } => k2,
            TailSpec::None => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsgdConfig {
    /// Outer (proximal) learning rate.
    pub alpha: f64,
    pub k0: usize,
    pub inner: InnerSolver,
    #[serde(default)]
    pub tail: TailSpec,
    /// Early-stop the inner solve once `‖∇G‖ < tol·(1 + ‖θ_n‖)`.
    pub inner_tolerance: Option<f64>,
}

impl IsgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.inner.k1() == 0 {
            return Err(Error::InvalidConfig("k1 must be at least 1".into()));
        }
        if let InnerSolver::Adam { lr, .. } = self.inner {
            if !(lr > 0.0) {
                return Err(Error::InvalidConfig("inner learning rate must be positive".into()));
            }
        }
        if let TailSpec::Adam { lr, .. } = self.tail {
            if !(lr > 0.0) {
                return Err(Error::InvalidConfig("tail learning rate must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one approximate proximal step.
#[derive(Clone, Debug)]
pub struct ProxStep {
    pub theta: ParamVector,
    /// `L(θ_n)` and `‖∇L(θ_n)‖` on the step's batch.
    pub loss: f64,
    pub grad_norm: f64,
    pub inner_iterations: usize,
}

fn prox_gradient(x: &ParamVector, center: &ParamVector, alpha: f64, g: &ParamVector) -> Result<ParamVector> {
    x.sub(center)?.axpy(alpha, g)
}

/// Approximately solves `argmin ½‖θ̃ − θ‖² + α·L(θ̃)` on a fixed batch.
///
/// `tol` is an absolute bound on `‖∇G‖` (zero disables early stopping).
pub fn prox_step(
    obj: &dyn Objective,
    theta: &ParamVector,
    batch: &Batch,
    alpha: f64,
    inner: &InnerSolver,
    tol: f64,
) -> Result<ProxStep> {
    match *inner {
        InnerSolver::Adam { lr, k1 } => {
            let mut adam = AdamState::new(lr, AdamParams::default());
            let mut x = theta.clone();
            let (mut loss, mut grad_norm) = (f64::NAN, f64::NAN);
            let mut iters = 0;
            for k in 0..k1 {
                let (l, g) = obj.loss_and_grad(&x, batch)?;
                if k == 0 {
                    loss = l;
                    grad_norm = g.norm();
                    if is_divergent(l) {
                        break;
                    }
                } else if !l.is_finite() {
                    return Err(Error::NonFinite { node: 0, op: "inner loss" });
                }
                let gg = prox_gradient(&x, theta, alpha, &g)?;
                if gg.norm() < tol {
                    break;
                }
                x = adam.step(&x, &gg, k)?;
                iters += 1;
            }
            Ok(ProxStep {
                theta: x,
                loss,
                grad_norm,
                inner_iterations: iters,
            })
        }
        InnerSolver::Lbfgs { k1 } => {
            let (loss, g0) = obj.loss_and_grad(theta, batch)?;
            if is_divergent(loss) {
                return Ok(ProxStep {
                    theta: theta.clone(),
                    loss,
                    grad_norm: g0.norm(),
                    inner_iterations: 0,
                });
            }
            let opts = LbfgsOptions {
                max_iters: k1,
                tolerance: tol,
                ..Default::default()
            };
            let g_fn = |x: &ParamVector| {
                let (l, g) = obj.loss_and_grad(x, batch)?;
                let d = x.sub(theta)?;
                let val = 0.5 * d.dot(&d)? + alpha * l;
                Ok((val, d.axpy(alpha, &g)?))
            };
            let r = lbfgs_minimize(g_fn, theta, &opts)?;
            Ok(ProxStep {
                theta: r.theta,
                loss,
                grad_norm: g0.norm(),
                inner_iterations: r.iterations,
            })
        }
    }
}

fn is_non_finite(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. } | Error::NonFiniteGradient { .. })
}

/// Runs `k0` proximal outer iterations followed by the tail optimizer.
///
/// Outer iteration `n` is recorded as `(n, L(θ_n), ‖∇L(θ_n)‖, prox residual)`;
/// tail steps continue the numbering from `k0`.
pub fn isgd_run(
    obj: &dyn Objective,
    theta0: &ParamVector,
    cfg: &IsgdConfig,
    rec: &mut Recorder,
) -> Result<ParamVector> {
    cfg.validate()?;
    let mut theta = theta0.clone();
    for n in 0..cfg.k0 {
        let batch = obj.batch(n)?;
        let tol = cfg.inner_tolerance.map_or(0.0, |t| t * (1.0 + theta.norm()));
        let step = match prox_step(obj, &theta, &batch, cfg.alpha, &cfg.inner, tol) {
            Ok(s) => s,
            Err(e) if is_non_finite(&e) => {
                rec.diverge(format!("inner solve at outer iteration {n}: {e}"));
                return Ok(theta);
            }
            Err(e) => return Err(e),
        };
        if is_divergent(step.loss) {
            if step.loss.is_finite() {
                rec.record(n, Phase::Isgd, step.loss, step.grad_norm, None, &theta)?;
            }
            rec.diverge(format!("loss {:e} at outer iteration {n}", step.loss));
            return Ok(theta);
        }
        let residual = match obj.loss_and_grad(&step.theta, &batch) {
            Ok((l, g)) if l.is_finite() => prox_gradient(&step.theta, &theta, cfg.alpha, &g)?.norm(),
            Ok(_) => f64::NAN,
            Err(e) if is_non_finite(&e) => f64::NAN,
            Err(e) => return Err(e),
        };
        rec.record(n, Phase::Isgd, step.loss, step.grad_norm, Some(residual), &theta)?;
        if !residual.is_finite() || !step.theta.is_finite() {
            rec.diverge(format!("non-finite iterate after outer iteration {n}"));
            return Ok(theta);
        }
        theta = step.theta;
    }
    let stepper = match cfg.tail {
        TailSpec::Adam { lr, .. } => Stepper::Adam(AdamState::new(lr, AdamParams::default())),
        TailSpec::Lbfgs { .. } => Stepper::lbfgs(LbfgsOptions::default()),
        TailSpec::None => return Ok(theta),
    };
    run_plain(obj, theta, stepper, cfg.k0, cfg.tail.k2(), rec)
}
