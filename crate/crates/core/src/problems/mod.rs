//! Loss definitions: the stiff quadratic, PINN residual losses and
//! regression losses.

mod pde;
mod quadratic;
mod regression;
mod sampling;

pub use pde::{Operator, PdeKind, PinnProblem, PoissonVariant};
pub use quadratic::{igd_exact_quadratic, QuadraticLoss};
pub use regression::{Reduction, RegressionProblem, RegressionTarget};
pub use sampling::{epoch_batch, Batch, BatchSpec};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, ParamVector, Scalar, ScalarLoss, Tape, Var};
use crate::error::{Error, Result};
use crate::network::Network;

/// Placement of 1D collocation points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Random,
    Grid,
}

#[derive(Clone, Debug)]
pub enum ProblemKind {
    Quadratic(QuadraticLoss),
    Pinn(PinnProblem),
    Regression(RegressionProblem),
}

/// A named loss `θ ↦ L(θ)` with its data and batching rule.
#[derive(Clone, Debug)]
pub struct Problem {
    name: String,
    kind: ProblemKind,
    batch: BatchSpec,
}

/// Something an optimizer can minimise.
pub trait Objective {
    fn loss(&self, theta: &ParamVector, batch: &Batch) -> Result<f64>;

    fn loss_and_grad(&self, theta: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)>;

    /// Batch to use at a given iteration.
    fn batch(&self, _iteration: usize) -> Result<Batch> {
        Ok(Batch::Full)
    }
}

fn check_network(net: &Network, dim: usize) -> Result<()> {
    let c = net.config();
    if c.input_dim != dim || c.output_dim != 1 {
        return Err(Error::InvalidConfig(format!(
            "network maps {} -> {}, problem needs {dim} -> 1",
            c.input_dim, c.output_dim
        )));
    }
    Ok(())
}

fn at_least(what: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidConfig(format!("{what} must be at least {min}, got {n}")));
    }
    Ok(())
}

impl Problem {
    fn new(name: impl Into<String>, kind: ProblemKind) -> Self {
        Self {
            name: name.into(),
            kind,
            batch: BatchSpec::Full,
        }
    }

    /// `L = (K1/2)(θ1 − θ1*)² + (K2/2)(θ2 − θ2*)²`
    pub fn quadratic_stiff(k1: f64, k2: f64, theta_star: [f64; 2]) -> Result<Self> {
        let q = QuadraticLoss::stiff(k1, k2, theta_star)?;
        Ok(Self::new("quadratic_stiff", ProblemKind::Quadratic(q)))
    }

    pub fn quadratic(q: QuadraticLoss) -> Self {
        Self::new("quadratic", ProblemKind::Quadratic(q))
    }

    /// `−u'' = f` on (0, 1), `u(0) = u(1) = 0`.
    pub fn poisson1d(
        net: Network,
        variant: PoissonVariant,
        n_r: usize,
        seed: u64,
        sampling: Sampling,
    ) -> Result<Self> {
        at_least("N_r", n_r, 2)?;
        check_network(&net, 1)?;
        let interior = match sampling {
            Sampling::Random => sampling::uniform(&mut ChaCha8Rng::seed_from_u64(seed), n_r, 0.0, 1.0),
            Sampling::Grid => sampling::grid_interior(n_r),
        };
        let pde = PdeKind::Poisson1d { variant };
        let name = match variant {
            PoissonVariant::Smooth => "poisson1d_smooth",
            PoissonVariant::Multiscale => "poisson1d_multiscale",
        };
        let p = PinnProblem::new(pde, net, interior, vec![0.0, 1.0]);
        Ok(Self::new(name, ProblemKind::Pinn(p)))
    }

    /// `−εy'' + y' = f` on (0, 1), `y(0) = y(1) = 0`.
    pub fn singular_ode(net: Network, eps: f64, n: usize, seed: u64) -> Result<Self> {
        at_least("N", n, 2)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
        }
        check_network(&net, 1)?;
        let interior = sampling::uniform(&mut ChaCha8Rng::seed_from_u64(seed), n, 0.0, 1.0);
        let p = PinnProblem::new(PdeKind::SingularOde { eps }, net, interior, vec![0.0, 1.0]);
        Ok(Self::new("singular_ode", ProblemKind::Pinn(p)))
    }

    /// `−Δu = f` on the unit square with zero boundary values.
    pub fn poisson2d(net: Network, n_b: usize, n_f: usize, seed: u64) -> Result<Self> {
        Self::square("poisson2d", PdeKind::Poisson2d, net, n_b, n_f, seed)
    }

    /// `Δu + k²u = f` on the unit square with zero boundary values.
    pub fn helmholtz2d(net: Network, k: f64, n_b: usize, n_f: usize, seed: u64) -> Result<Self> {
        Self::square("helmholtz2d", PdeKind::Helmholtz2d { k }, net, n_b, n_f, seed)
    }

    fn square(name: &str, pde: PdeKind, net: Network, n_b: usize, n_f: usize, seed: u64) -> Result<Self> {
        at_least("N_b", n_b, 4)?;
        at_least("N_f", n_f, 1)?;
        check_network(&net, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = sampling::uniform(&mut rng, 2 * n_f, 0.0, 1.0);
        let boundary = sampling::square_boundary(&mut rng, n_b);
        let p = PinnProblem::new(pde, net, interior, boundary);
        Ok(Self::new(name, ProblemKind::Pinn(p)))
    }

    /// Mean squared error against a target function on `n` uniform points
    /// in [−3, 3].
    pub fn regression(net: Network, target: RegressionTarget, n: usize, seed: u64) -> Result<Self> {
        at_least("N", n, 2)?;
        check_network(&net, 1)?;
        let inputs = sampling::uniform(&mut ChaCha8Rng::seed_from_u64(seed), n, -3.0, 3.0);
        let labels = inputs.iter().map(|&x| target.eval(x)).collect();
        let name = match target {
            RegressionTarget::MultiscaleC1 => "regression_multiscale",
            RegressionTarget::DiscontinuousC2 => "regression_discontinuous",
        };
        let p = RegressionProblem {
            network: net,
            inputs,
            labels,
            reduction: Reduction::Mean,
            target: Some(target),
        };
        Ok(Self::new(name, ProblemKind::Regression(p)))
    }

    /// Fit to explicit data; `inputs` is `n × input_dim`.
    pub fn regression_data(
        net: Network,
        inputs: Vec<f64>,
        labels: Vec<f64>,
        reduction: Reduction,
    ) -> Result<Self> {
        let d = net.input_dim();
        if inputs.len() != labels.len() * d {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * d,
                got: inputs.len(),
            });
        }
        let p = RegressionProblem {
            network: net,
            inputs,
            labels,
            reduction,
            target: None,
        };
        Ok(Self::new("regression_data", ProblemKind::Regression(p)))
    }

    pub fn with_batch(mut self, spec: BatchSpec) -> Result<Self> {
        if let BatchSpec::MiniBatch { size, .. } = spec {
            let n = self.dataset_len();
            if size == 0 || size > n {
                return Err(Error::InvalidConfig(format!(
                    "batch size {size} for a dataset of {n} points"
                )));
            }
        }
        self.batch = spec;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn batch_spec(&self) -> BatchSpec {
        self.batch
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.kind {
            ProblemKind::Quadratic(_) => None,
            ProblemKind::Pinn(p) => Some(&p.network),
            ProblemKind::Regression(r) => Some(&r.network),
        }
    }

    /// Number of points mini-batches are drawn from (PINN interior points or
    /// regression samples; boundary terms are always evaluated in full).
    pub fn dataset_len(&self) -> usize {
        match &self.kind {
            ProblemKind::Quadratic(_) => 1,
            ProblemKind::Pinn(p) => p.n_interior(),
            ProblemKind::Regression(r) => r.n(),
        }
    }

    pub fn sample_batch(&self, iteration: usize) -> Result<Batch> {
        epoch_batch(self.dataset_len(), self.batch, iteration)
    }

    pub fn has_exact(&self) -> bool {
        match &self.kind {
            ProblemKind::Quadratic(_) => false,
            ProblemKind::Pinn(_) => true,
            ProblemKind::Regression(r) => r.target.is_some(),
        }
    }

    pub fn exact(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            ProblemKind::Quadratic(_) => None,
            ProblemKind::Pinn(p) => Some(p.pde.exact(x)),
            ProblemKind::Regression(r) => r.target.map(|t| t.eval(x[0])),
        }
    }

    /// Fixed evaluation grid for error metrics: 1001 points in 1D, 101×101 in
    /// 2D, row-major.
    pub fn eval_grid(&self) -> Option<Vec<f64>> {
        let lin = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        match &self.kind {
            ProblemKind::Quadratic(_) => None,
            ProblemKind::Pinn(p) if p.pde.dim() == 1 => Some(lin(1001, 0.0, 1.0)),
            ProblemKind::Pinn(_) => {
                let g = lin(101, 0.0, 1.0);
                Some(g.iter().flat_map(|&x| g.iter().flat_map(move |&y| [x, y])).collect())
            }
            ProblemKind::Regression(r) => r.target.map(|_| lin(1001, -3.0, 3.0)),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.dim(),
            ProblemKind::Pinn(p) => p.pde.dim(),
            ProblemKind::Regression(r) => r.network.input_dim(),
        }
    }

    fn record_batch<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var, batch: &Batch) -> Result<Var> {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.record(tape, theta),
            ProblemKind::Pinn(p) => p.record(tape, theta, batch),
            ProblemKind::Regression(r) => r.record(tape, theta, batch),
        }
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        let expected = match self.network() {
            Some(net) => net.param_count(),
            None => self.input_dim(),
        };
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// `∇²L(θ)·v` on the full dataset.
    pub fn hvp(&self, theta: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        self.check_theta(theta)?;
        autodiff::hvp(self, theta, v)
    }

    /// Writes the collocation/boundary data as CSV.
    pub fn write_dataset(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        match &self.kind {
            ProblemKind::Quadratic(_) => return Err(Error::Unsupported("dataset of a quadratic".into())),
            ProblemKind::Pinn(p) => {
                let dim = p.pde.dim();
                let mut header = vec!["set", "x"];
                if dim == 2 {
                    header.push("y");
                }
                header.extend(["f", "u_exact"]);
                w.write_record(&header).map_err(csv_err)?;
                for (x, f) in p.interior.chunks(dim).zip(&p.forcing) {
                    let mut row = vec!["interior".to_string()];
                    row.extend(x.iter().map(f64::to_string));
                    row.push(f.to_string());
                    row.push(p.pde.exact(x).to_string());
                    w.write_record(&row).map_err(csv_err)?;
                }
                for (x, g) in p.boundary.chunks(dim).zip(&p.boundary_values) {
                    let mut row = vec!["boundary".to_string()];
                    row.extend(x.iter().map(f64::to_string));
                    row.push(String::new());
                    row.push(g.to_string());
                    w.write_record(&row).map_err(csv_err)?;
                }
            }
            ProblemKind::Regression(r) => {
                let d = r.network.input_dim();
                let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
                header.push("label".into());
                w.write_record(&header).map_err(csv_err)?;
                for (x, y) in r.inputs.chunks(d).zip(&r.labels) {
                    let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
                    row.push(y.to_string());
                    w.write_record(&row).map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// A problem restricted to one batch.
struct Restricted<'a> {
    problem: &'a Problem,
    batch: &'a Batch,
}

impl ScalarLoss for Restricted<'_> {
    fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var) -> Result<Var> {
        self.problem.record_batch(tape, theta, self.batch)
    }
}

/// The full-dataset loss.
impl ScalarLoss for Problem {
    fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var) -> Result<Var> {
        self.record_batch(tape, theta, &Batch::Full)
    }
}

impl Objective for Problem {
    fn loss(&self, theta: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check_theta(theta)?;
        autodiff::value(&Restricted { problem: self, batch }, theta)
    }

    fn loss_and_grad(&self, theta: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
        self.check_theta(theta)?;
        autodiff::grad(&Restricted { problem: self, batch }, theta)
    }

    fn batch(&self, iteration: usize) -> Result<Batch> {
        self.sample_batch(iteration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build, InitScheme, NetworkConfig};

    fn net(d: usize) -> Network {
        build(NetworkConfig::tanh(d, &[5]), InitScheme::glorot(0)).unwrap().0
    }

    #[test]
    fn construction_validation() {
        assert!(Problem::poisson1d(net(1), PoissonVariant::Smooth, 1, 0, Sampling::Random).is_err());
        assert!(Problem::poisson1d(net(2), PoissonVariant::Smooth, 10, 0, Sampling::Random).is_err());
        assert!(Problem::singular_ode(net(1), 0.0, 10, 0).is_err());
        assert!(Problem::poisson2d(net(2), 3, 10, 0).is_err());
        let p = Problem::singular_ode(net(1), 2.0, 10, 0).unwrap();
        assert!(p.with_batch(BatchSpec::MiniBatch { size: 11, seed: 0 }).is_err());
    }

    #[test]
    fn grid_sampling_is_interior_and_even() {
        let p = Problem::poisson1d(net(1), PoissonVariant::Smooth, 4, 0, Sampling::Grid).unwrap();
        let ProblemKind::Pinn(pinn) = p.kind() else { panic!() };
        assert_eq!(pinn.interior, vec![0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn boundary_term_vanishes_for_zero_network() {
        let p = Problem::poisson2d(net(2), 40, 5, 3).unwrap();
        let ProblemKind::Pinn(pinn) = p.kind() else { panic!() };
        assert!(pinn.boundary_values.iter().all(|g| g.abs() < 1e-14));
        for xy in pinn.boundary.chunks(2) {
            assert!(xy.iter().any(|&c| c == 0.0 || c == 1.0));
        }
    }

    #[test]
    fn minibatch_loss_uses_the_subset() {
        let p = Problem::regression(net(1), RegressionTarget::MultiscaleC1, 20, 1)
            .unwrap()
            .with_batch(BatchSpec::MiniBatch { size: 5, seed: 2 })
            .unwrap();
        let theta = build(NetworkConfig::tanh(1, &[5]), InitScheme::glorot(0)).unwrap().1;
        let b = p.batch(0).unwrap();
        assert_eq!(b.len(20), 5);
        let full = p.loss(&theta, &Batch::Full).unwrap();
        let part = p.loss(&theta, &b).unwrap();
        assert_ne!(full, part);
        let (l, _) = p.loss_and_grad(&theta, &b).unwrap();
        assert_eq!(l, part);
    }
}
