use serde::{Deserialize, Serialize};

use super::adam::{AdamParams, AdamState};
use super::isgd::{isgd_run, IsgdConfig};
use super::lbfgs::{Lbfgs, LbfgsOptions, Point};
use super::sgd::gd_step;
use super::trace::{is_divergent, ErrorMonitor, Phase, Recorder, TraceSink, TrainingTrace};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::problems::{Batch, Objective};

/// Optimizer selection for [`train`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum OptimizerSpec {
    Sgd { lr: f64, iterations: usize },
    Adam { lr: f64, iterations: usize },
    Lbfgs { iterations: usize },
    Isgd(IsgdConfig),
}

/// Per-step state of a plain optimizer.
pub enum Stepper {
    Sgd(f64),
    Adam(AdamState),
    Lbfgs(Lbfgs, Option<Point>),
}

impl Stepper {
    pub fn lbfgs(opts: LbfgsOptions) -> Self {
        Stepper::Lbfgs(Lbfgs::new(opts), None)
    }
}

enum Step {
    Next(ParamVector),
    Stalled(&'static str),
}

/// Runs `steps` iterations of a plain optimizer, numbering records from
/// `start`. Each record holds the loss and gradient norm before the step.
pub fn run_plain(
    obj: &dyn Objective,
    mut theta: ParamVector,
    mut stepper: Stepper,
    start: usize,
    steps: usize,
    rec: &mut Recorder,
) -> Result<ParamVector> {
    for it in start..start + steps {
        let batch = obj.batch(it)?;
        let evaluated = match &mut stepper {
            // full-batch L-BFGS reuses the point accepted by the last line search
            Stepper::Lbfgs(_, Some(p)) if batch == Batch::Full => Ok((p.f, p.g.clone())),
            _ => obj.loss_and_grad(&theta, &batch),
        };
        let (loss, grad) = match evaluated {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => {
                rec.diverge(format!("non-finite loss at iteration {it}"));
                return Ok(theta);
            }
            Err(e) => return Err(e),
        };
        if is_divergent(loss) || !grad.is_finite() {
            if loss.is_finite() {
                rec.record(it, Phase::Tail, loss, grad.norm(), None, &theta)?;
            }
            rec.diverge(format!("loss {loss:e} at iteration {it}"));
            return Ok(theta);
        }
        rec.record(it, Phase::Tail, loss, grad.norm(), None, &theta)?;
        let step = match &mut stepper {
            Stepper::Sgd(lr) => Step::Next(gd_step(&theta, &grad, *lr, it)?),
            Stepper::Adam(a) => Step::Next(a.step(&theta, &grad, it)?),
            Stepper::Lbfgs(solver, last) => {
                let p = Point {
                    x: theta.clone(),
                    f: loss,
                    g: grad,
                };
                let mut f = |x: &ParamVector| obj.loss_and_grad(x, &batch);
                match solver.iterate(&mut f, &p)? {
                    Some(next) => {
                        let x = next.x.clone();
                        *last = Some(next);
                        Step::Next(x)
                    }
                    None => Step::Stalled("line search failed"),
                }
            }
        };
        match step {
            Step::Next(next) => theta = next,
            Step::Stalled(why) => {
                rec.trace.note = Some(format!("{why} at iteration {it}"));
                return Ok(theta);
            }
        }
    }
    Ok(theta)
}

/// Uniform training driver.
pub fn train(
    obj: &dyn Objective,
    theta0: &ParamVector,
    spec: &OptimizerSpec,
    sink: &mut dyn TraceSink,
    monitor: Option<ErrorMonitor<'_>>,
) -> Result<(ParamVector, TrainingTrace)> {
    train_recorded(obj, theta0, spec, Recorder::new(sink, monitor))
}

/// [`train`] with a caller-configured recorder.
pub fn train_recorded(
    obj: &dyn Objective,
    theta0: &ParamVector,
    spec: &OptimizerSpec,
    mut rec: Recorder,
) -> Result<(ParamVector, TrainingTrace)> {
    let theta = match *spec {
        OptimizerSpec::Sgd { lr, iterations } => {
            run_plain(obj, theta0.clone(), Stepper::Sgd(lr), 0, iterations, &mut rec)?
        }
        OptimizerSpec::Adam { lr, iterations } => {
            let s = Stepper::Adam(AdamState::new(lr, AdamParams::default()));
            run_plain(obj, theta0.clone(), s, 0, iterations, &mut rec)?
        }
        OptimizerSpec::Lbfgs { iterations } => {
            let s = Stepper::lbfgs(LbfgsOptions::default());
            run_plain(obj, theta0.clone(), s, 0, iterations, &mut rec)?
        }
        OptimizerSpec::Isgd(cfg) => isgd_run(obj, theta0, &cfg, &mut rec)?,
    };
    Ok((theta, rec.finish()?))
}
