//! Hessian spectra, loss-decay identities and solution error metrics.

mod spectrum;

pub use spectrum::{
    dense_hessian, hessian_spectrum, lanczos, LanczosOptions, LanczosResult, Spectrum, SpectrumMethod,
    SpectrumReport, DENSE_CAP,
};

use std::io::Write;
use std::path::Path;

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::problems::{Batch, Objective, Problem, ProblemKind};

/// Both sides of a one-step loss-decay identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayIdentity {
    /// `L(θ_{n+1}) − L(θ_n)`
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub residual: f64,
    /// False for non-quadratic losses, where the identity only holds at an
    /// unknown intermediate point and the residual is informational.
    pub exact: bool,
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    let s = lhs.abs().max(rhs.abs());
    if s == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / s
    }
}

/// `α‖g‖²·(∓1 + ½α·ĝᵀHĝ)`-type right-hand side; `gᵀHg = ‖g‖²Σλ_i y_i²`.
fn decay_rhs(problem: &Problem, g: &ParamVector, at: &ParamVector, alpha: f64, sign: f64) -> Result<f64> {
    let gg = g.dot(g)?;
    if gg == 0.0 {
        return Ok(0.0);
    }
    let curvature = g.dot(&problem.hvp(at, g)?)?;
    Ok(alpha * gg * (-1.0 + sign * 0.5 * alpha * curvature / gg))
}

fn identity(problem: &Problem, theta_n: &ParamVector, theta_next: &ParamVector, g: &ParamVector, alpha: f64, sign: f64) -> Result<DecayIdentity> {
    let (lhs, rhs, exact) = match problem.kind() {
        // Both sides summed per eigencomponent (the coordinates), so neither
        // cancels against L or against ‖g‖² near αK_i = 2.
        ProblemKind::Quadratic(q) => {
            let (a, b, g) = (theta_n.as_slice(), theta_next.as_slice(), g.as_slice());
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for i in 0..q.dim() {
                let s = q.theta_star[i];
                lhs += 0.5 * q.k[i] * (b[i] - a[i]) * ((b[i] - s) + (a[i] - s));
                rhs += alpha * g[i] * g[i] * (-1.0 + sign * 0.5 * alpha * q.k[i]);
            }
            (lhs, rhs, true)
        }
        _ => {
            let lhs = problem.loss(theta_next, &Batch::Full)? - problem.loss(theta_n, &Batch::Full)?;
            // the midpoint stands in for the unknown ξ
            let xi = theta_n.axpy(1.0, theta_next)?.scaled(0.5);
            (lhs, decay_rhs(problem, g, &xi, alpha, sign)?, false)
        }
    };
    Ok(DecayIdentity {
        lhs,
        rhs,
        residual: relative(lhs, rhs),
        exact,
    })
}

/// `L(θ_{n+1}) − L(θ_n) = α‖∇L(θ_n)‖²(−1 + ½αΣλ_i y_i²)` for an explicit step.
pub fn gd_decay_identity(problem: &Problem, theta_n: &ParamVector, theta_next: &ParamVector, alpha: f64) -> Result<DecayIdentity> {
    let (_, g) = problem.loss_and_grad(theta_n, &Batch::Full)?;
    identity(problem, theta_n, theta_next, &g, alpha, 1.0)
}

/// `L(θ_{n+1}) − L(θ_n) = α‖∇L(θ_{n+1})‖²(−1 − ½αΣλ_i y_i²)` for an implicit step.
pub fn igd_decay_identity(problem: &Problem, theta_n: &ParamVector, theta_next: &ParamVector, alpha: f64) -> Result<DecayIdentity> {
    let (_, g) = problem.loss_and_grad(theta_next, &Batch::Full)?;
    identity(problem, theta_n, theta_next, &g, alpha, -1.0)
}

pub fn write_decay_csv(path: &Path, rows: &[(usize, DecayIdentity)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iteration,lhs,rhs,residual,exact")?;
    for (it, d) in rows {
        writeln!(f, "{it},{:e},{:e},{:e},{}", d.lhs, d.rhs, d.residual, d.exact)?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolutionError {
    /// `‖u_θ − u‖₂ / ‖u‖₂` on the evaluation grid.
    pub rel_l2: f64,
    pub max_abs: f64,
}

/// Error of the network against the exact solution on the problem's fixed grid.
pub fn rel_l2_error(problem: &Problem, theta: &ParamVector) -> Result<SolutionError> {
    let (Some(net), Some(grid)) = (problem.network(), problem.eval_grid()) else {
        return Err(Error::Missing("exact solution"));
    };
    let d = problem.input_dim();
    let u = net.forward_batch(theta, &grid)?;
    let exact = grid
        .chunks(d)
        .map(|x| problem.exact(x).ok_or(Error::Missing("exact solution")))
        .collect::<Result<Vec<_>>>()?;
    Ok(solution_error(&u, &exact))
}

/// Relative L2 and max-abs error of `pred` against `exact` at the same points.
pub fn solution_error(pred: &[f64], exact: &[f64]) -> SolutionError {
    let (mut num, mut den, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (v, e) in pred.iter().zip(exact) {
        num += (v - e) * (v - e);
        den += e * e;
        max_abs = max_abs.max((v - e).abs());
    }
    SolutionError {
        rel_l2: (num / den).sqrt(),
        max_abs,
    }
}
