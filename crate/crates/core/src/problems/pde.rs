//! Manufactured-solution PINN problems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DualScalar, Jet, Scalar, Tape, Var};
use crate::error::Result;
use crate::network::Network;

use super::sampling::Batch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonVariant {
    /// `u = sin(2πx)`
    Smooth,
    /// `u = sin(2πx) + 0.1 sin(50πx)`
    Multiscale,
}

/// A linear second-order operator with its manufactured solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PdeKind {
    /// `−u'' = f` on (0, 1)
    Poisson1d { variant: PoissonVariant },
    /// `−εy'' + y' = f` on (0, 1)
    SingularOde { eps: f64 },
    /// `−Δu = f` on the unit square
    Poisson2d,
    /// `Δu + k²u = f` on the unit square
    Helmholtz2d { k: f64 },
}

/// Coefficients of `c0·u + Σ_a c1_a ∂_a u + Σ_a c2_a ∂²_a u`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    pub c0: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl Operator {
    /// Applies the operator to already-computed derivatives.
    pub fn apply<S: Scalar>(&self, u: S, du: &[S], d2u: &[S]) -> S {
        let mut acc = u.scale(self.c0);
        for (c, &d) in self.c1.iter().zip(du) {
            acc += d.scale(*c);
        }
        for (c, &d) in self.c2.iter().zip(d2u) {
            acc += d.scale(*c);
        }
        acc
    }

    /// The same combination of jet components on a tape.
    pub fn record<T: Scalar>(&self, tape: &mut Tape<T>, jet: &Jet) -> Var {
        let mut terms = Vec::new();
        if self.c0 != 0.0 {
            terms.push(tape.scale(jet.value, self.c0));
        }
        for (a, &c) in self.c1.iter().enumerate() {
            if c != 0.0 {
                terms.push(tape.scale(jet.d1[a], c));
            }
        }
        for (a, &c) in self.c2.iter().enumerate() {
            if let (true, Some(d2)) = (c != 0.0, jet.d2[a]) {
                terms.push(tape.scale(d2, c));
            }
        }
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = tape.add(acc, t);
        }
        acc
    }
}

impl PdeKind {
    pub fn dim(&self) -> usize {
        match self {
            PdeKind::Poisson1d { .. } | PdeKind::SingularOde { .. } => 1,
            PdeKind::Poisson2d | PdeKind::Helmholtz2d { .. } => 2,
        }
    }

    pub fn operator(&self) -> Operator {
        match *self {
            PdeKind::Poisson1d { .. } => Operator {
                c0: 0.0,
                c1: vec![0.0],
                c2: vec![-1.0],
            },
            PdeKind::SingularOde { eps } => Operator {
                c0: 0.0,
                c1: vec![1.0],
                c2: vec![-eps],
            },
            PdeKind::Poisson2d => Operator {
                c0: 0.0,
                c1: vec![0.0, 0.0],
                c2: vec![-1.0, -1.0],
            },
            PdeKind::Helmholtz2d { k } => Operator {
                c0: k * k,
                c1: vec![0.0, 0.0],
                c2: vec![1.0, 1.0],
            },
        }
    }

    /// Exact solution in any scalar type (used with [`DualScalar`] for its
    /// derivatives).
    pub fn exact<S: Scalar>(&self, x: &[S]) -> S {
        let sin_k = |z: S, k: f64| z.scale(k * PI).sin();
        match *self {
            PdeKind::Poisson1d { variant } => {
                let low = sin_k(x[0], 2.0);
                match variant {
                    PoissonVariant::Smooth => low,
                    PoissonVariant::Multiscale => low + sin_k(x[0], 50.0).scale(0.1),
                }
            }
            PdeKind::SingularOde { eps } => {
                let layer = layer_numerator(x[0], eps) / S::from_f64(layer_numerator(1.0, eps));
                sin_k(x[0], 0.5) - layer
            }
            PdeKind::Poisson2d => {
                sin_k(x[0], 1.0) * sin_k(x[1], 1.0)
                    + (sin_k(x[0], 10.0) * sin_k(x[1], 10.0)).scale(0.1)
            }
            PdeKind::Helmholtz2d { .. } => sin_k(x[0], 1.0) * sin_k(x[1], 4.0),
        }
    }

    /// Hand-derived forcing term.
    pub fn forcing(&self, x: &[f64]) -> f64 {
        let s = |z: f64, k: f64| (k * PI * z).sin();
        match *self {
            PdeKind::Poisson1d { variant } => {
                let low = 4.0 * PI * PI * s(x[0], 2.0);
                match variant {
                    PoissonVariant::Smooth => low,
                    PoissonVariant::Multiscale => low + 250.0 * PI * PI * s(x[0], 50.0),
                }
            }
            // the boundary-layer part is annihilated by the operator
            PdeKind::SingularOde { eps } => {
                eps * PI * PI / 4.0 * s(x[0], 0.5) + PI / 2.0 * (PI / 2.0 * x[0]).cos()
            }
            PdeKind::Poisson2d => {
                2.0 * PI * PI * s(x[0], 1.0) * s(x[1], 1.0)
                    + 20.0 * PI * PI * s(x[0], 10.0) * s(x[1], 10.0)
            }
            PdeKind::Helmholtz2d { k } => (k * k - 17.0 * PI * PI) * s(x[0], 1.0) * s(x[1], 4.0),
        }
    }

    /// `(u, ∂_a u, ∂²_a u)` of the exact solution for every axis `a`.
    pub fn exact_derivatives(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let mut d1 = Vec::with_capacity(dim);
        let mut d2 = Vec::with_capacity(dim);
        let mut u = 0.0;
        for a in 0..dim {
            let xd: Vec<DualScalar> = (0..dim)
                .map(|i| {
                    if i == a {
                        DualScalar::variable(x[i])
                    } else {
                        DualScalar::constant(x[i])
                    }
                })
                .collect();
            let y = self.exact(&xd);
            u = y.value;
            d1.push(y.d1);
            d2.push(y.d2);
        }
        (u, d1, d2)
    }

    /// Operator applied to the exact solution minus the forcing.
    pub fn exact_residual(&self, x: &[f64]) -> f64 {
        let (u, d1, d2) = self.exact_derivatives(x);
        self.operator().apply(u, &d1, &d2) - self.forcing(x)
    }
}

/// `e^{−1/ε}(e^{x/ε} − 1)`, the boundary-layer term scaled so that it
/// neither overflows nor cancels; `y = sin(πx/2) − num(x)/num(1)`.
fn layer_numerator<S: Scalar>(x: S, eps: f64) -> S {
    let shift = (-1.0 / eps).exp();
    if x.value() / eps <= 700.0 && shift > 0.0 {
        x.scale(1.0 / eps).exp_m1().scale(shift)
    } else {
        (x - S::from_f64(1.0)).scale(1.0 / eps).exp() - S::from_f64(shift)
    }
}

/// PINN loss: mean squared boundary mismatch plus mean squared residual.
#[derive(Clone, Debug)]
pub struct PinnProblem {
    pub pde: PdeKind,
    pub network: Network,
    /// `n × dim` collocation points.
    pub interior: Vec<f64>,
    pub forcing: Vec<f64>,
    /// `n_b × dim` boundary points.
    pub boundary: Vec<f64>,
    pub boundary_values: Vec<f64>,
}

impl PinnProblem {
    pub fn new(pde: PdeKind, network: Network, interior: Vec<f64>, boundary: Vec<f64>) -> Self {
        let dim = pde.dim();
        let forcing = interior.chunks(dim).map(|x| pde.forcing(x)).collect();
        let boundary_values = boundary.chunks(dim).map(|x| pde.exact(x)).collect();
        Self {
            pde,
            network,
            interior,
            forcing,
            boundary,
            boundary_values,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.forcing.len()
    }

    pub fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var, batch: &Batch) -> Result<Var> {
        let dim = self.pde.dim();
        let op = self.pde.operator();
        let axes: Vec<usize> = (0..dim).collect();

        let ub = self.network.record(tape, theta, &self.boundary, &[], 0)?;
        let g = tape.constant(self.boundary_values.len(), 1, &self.boundary_values);
        let db = tape.sub(ub.value, g);
        let sq = tape.square(db);
        let boundary = tape.mean(sq);

        let pts = batch.select(&self.interior, dim);
        let f = batch.select(&self.forcing, 1);
        let jet = self.network.record(tape, theta, &pts, &axes, 2)?;
        let lu = op.record(tape, &jet);
        let fv = tape.constant(f.len(), 1, &f);
        let r = tape.sub(lu, fv);
        let r2 = tape.square(r);
        let residual = tape.mean(r2);
        Ok(tape.add(boundary, residual))
    }

    /// The loss with the exact solution substituted for the network.
    pub fn exact_loss(&self) -> f64 {
        let dim = self.pde.dim();
        let nb = self.boundary_values.len() as f64;
        let boundary: f64 = self
            .boundary
            .chunks(dim)
            .zip(&self.boundary_values)
            .map(|(x, g)| (self.pde.exact(x) - g).powi(2))
            .sum::<f64>()
            / nb;
        let residual: f64 = self
            .interior
            .chunks(dim)
            .map(|x| self.pde.exact_residual(x).powi(2))
            .sum::<f64>()
            / self.n_interior() as f64;
        boundary + residual
    }
}
