use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::Result;

/// Losses above this (or non-finite) mark a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Outer proximal iterations.
    Isgd,
    /// Plain optimizer steps on the loss.
    Tail,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Isgd => "isgd",
            Phase::Tail => "tail",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub loss: f64,
    pub grad_norm: f64,
    pub rel_l2_error: Option<f64>,
    /// `‖θ_{n+1} − θ_n + α∇L(θ_{n+1})‖`, outer iterations only.
    pub prox_residual: Option<f64>,
    pub elapsed_seconds: f64,
}

pub trait TraceSink {
    fn record(&mut self, r: &TraceRecord) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards records.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _: &TraceRecord) -> Result<()> {
        Ok(())
    }
}

pub const TRACE_HEADER: &str =
    "iteration,phase,loss,grad_norm,rel_l2_error,prox_residual,elapsed_seconds";

/// CSV trace writer, flushed every `flush_every` records.
pub struct CsvSink<W: Write> {
    out: W,
    pending: usize,
    flush_every: usize,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        out.flush()?;
        Ok(Self {
            out,
            pending: 0,
            flush_every: 100,
        })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, r: &TraceRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{:e},{:e},{},{},{:.6}",
            r.iteration,
            r.phase.as_str(),
            r.loss,
            r.grad_norm,
            opt(r.rel_l2_error),
            opt(r.prox_residual),
            r.elapsed_seconds
        )?;
        self.pending += 1;
        if self.pending >= self.flush_every {
            self.out.flush()?;
            self.pending = 0;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Records of one run and how it ended.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub diverged: bool,
    /// Why the run stopped early, if it did.
    pub note: Option<String>,
    /// Parameters at the requested snapshot iterations, before their step.
    pub snapshots: Vec<(usize, ParamVector)>,
}

impl TrainingTrace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }
}

/// Optional error metric evaluated every `every` iterations.
pub struct ErrorMonitor<'a> {
    pub every: usize,
    pub eval: &'a dyn Fn(&ParamVector) -> Result<f64>,
}

/// Collects records into a [`TrainingTrace`], forwards them to a sink and
/// stamps wall time.
pub struct Recorder<'a> {
    sink: &'a mut dyn TraceSink,
    monitor: Option<ErrorMonitor<'a>>,
    start: Instant,
    snapshot_at: Vec<usize>,
    pub trace: TrainingTrace,
}

impl<'a> Recorder<'a> {
    pub fn new(sink: &'a mut dyn TraceSink, monitor: Option<ErrorMonitor<'a>>) -> Self {
        Self {
            sink,
            monitor,
            start: Instant::now(),
            snapshot_at: Vec::new(),
            trace: TrainingTrace::default(),
        }
    }

    /// Keeps a copy of θ at each listed iteration.
    pub fn with_snapshots(mut self, iterations: &[usize]) -> Self {
        self.snapshot_at = iterations.to_vec();
        self
    }

    pub fn record(
        &mut self,
        iteration: usize,
        phase: Phase,
        loss: f64,
        grad_norm: f64,
        prox_residual: Option<f64>,
        theta: &ParamVector,
    ) -> Result<()> {
        let rel_l2_error = match &self.monitor {
            Some(m) if m.every > 0 && iteration % m.every == 0 => Some((m.eval)(theta)?),
            _ => None,
        };
        let r = TraceRecord {
            iteration,
            phase,
            loss,
            grad_norm,
            rel_l2_error,
            prox_residual,
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
        };
        self.sink.record(&r)?;
        self.trace.records.push(r);
        if self.snapshot_at.contains(&iteration) {
            self.trace.snapshots.push((iteration, theta.clone()));
        }
        Ok(())
    }

    pub fn diverge(&mut self, note: impl Into<String>) {
        self.trace.diverged = true;
        self.trace.note = Some(note.into());
    }

    pub fn finish(self) -> Result<TrainingTrace> {
        self.sink.finish()?;
        Ok(self.trace)
    }
}

pub fn is_divergent(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_THRESHOLD
}
