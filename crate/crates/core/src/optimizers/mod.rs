//! GD/SGD, Adam, L-BFGS and the proximal ISGD scheme.

mod adam;
mod isgd;
mod lbfgs;
mod sgd;
mod trace;
mod train;

pub use adam::{AdamParams, AdamState};
pub use isgd::{isgd_run, prox_step, InnerSolver, IsgdConfig, ProxStep, TailSpec, DEFAULT_K1};
pub use lbfgs::{lbfgs_minimize, Lbfgs, LbfgsOptions, LbfgsReport, Point};
pub use sgd::gd_step;
pub use trace::{
    is_divergent, CsvSink, ErrorMonitor, NullSink, Phase, Recorder, TraceRecord, TraceSink,
    TrainingTrace, DIVERGENCE_THRESHOLD, TRACE_HEADER,
};
pub use train::{run_plain, train, train_recorded, OptimizerSpec, Stepper};

pub use crate::problems::igd_exact_quadratic;
