use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;

/// Largest parameter count the dense method accepts.
pub const DENSE_CAP: usize = 8000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SpectrumMethod {
    Dense,
    /// `k` extremal Ritz values at each end.
    Lanczos { k: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Spectrum {
    /// Every eigenvalue, ascending.
    Dense(Vec<f64>),
    /// Extremal Ritz values, each list ascending.
    Lanczos {
        smallest: Vec<f64>,
        largest: Vec<f64>,
        converged: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub spectrum: Spectrum,
    /// Parameter count.
    pub dim: usize,
    pub mv_products: usize,
    /// `‖H − Hᵀ‖_∞/‖H‖_∞` of the assembled matrix (dense only).
    pub asymmetry: Option<f64>,
}

impl SpectrumReport {
    pub fn lambda_max(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Dense(ev) => *ev.last().unwrap_or(&f64::NAN),
            Spectrum::Lanczos { largest, .. } => *largest.last().unwrap_or(&f64::NAN),
        }
    }

    pub fn lambda_min(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Dense(ev) => *ev.first().unwrap_or(&f64::NAN),
            Spectrum::Lanczos { smallest, .. } => *smallest.first().unwrap_or(&f64::NAN),
        }
    }

    /// `(index in the ascending spectrum, eigenvalue)` pairs.
    pub fn indexed(&self) -> Vec<(usize, f64)> {
        match &self.spectrum {
            Spectrum::Dense(ev) => ev.iter().copied().enumerate().collect(),
            Spectrum::Lanczos { smallest, largest, .. } => {
                let mut out: Vec<(usize, f64)> = smallest.iter().copied().enumerate().collect();
                let first = self.dim - largest.len();
                // the two ends overlap when the Krylov space is the whole space
                out.extend(
                    largest
                        .iter()
                        .copied()
                        .enumerate()
                        .map(|(i, v)| (first + i, v))
                        .filter(|&(i, _)| i >= smallest.len()),
                );
                out
            }
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "index,eigenvalue")?;
        for (i, v) in self.indexed() {
            writeln!(f, "{i},{v:e}")?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Eigenvalues of `∇²L(θ)` on the full dataset.
pub fn hessian_spectrum(problem: &Problem, theta: &ParamVector, method: SpectrumMethod) -> Result<SpectrumReport> {
    let n = theta.len();
    match method {
        SpectrumMethod::Dense => {
            if n > DENSE_CAP {
                return Err(Error::SizeCap {
                    method: "dense spectrum (use lanczos)",
                    cap: DENSE_CAP,
                    size: n,
                });
            }
            let h = dense_hessian(problem, theta)?;
            let asym = linalg::asymmetry(n, &h);
            let mut h = h;
            linalg::symmetrize(n, &mut h);
            Ok(SpectrumReport {
                spectrum: Spectrum::Dense(linalg::sym_eigenvalues(n, &h)),
                dim: n,
                mv_products: n,
                asymmetry: Some(asym),
            })
        }
        SpectrumMethod::Lanczos { k } => {
            let opts = LanczosOptions { k, ..Default::default() };
            let r = lanczos(n, |v| Ok(problem.hvp(theta, &theta.with_data(v.to_vec())?)?.into_vec()), &opts)?;
            Ok(SpectrumReport {
                spectrum: Spectrum::Lanczos {
                    smallest: r.smallest,
                    largest: r.largest,
                    converged: r.converged,
                },
                dim: n,
                mv_products: r.mv_products,
                asymmetry: None,
            })
        }
    }
}

/// Row-major Hessian assembled from HVPs on basis vectors, unsymmetrized.
pub fn dense_hessian(problem: &Problem, theta: &ParamVector) -> Result<Vec<f64>> {
    let n = theta.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            Ok(problem.hvp(theta, &theta.with_data(e)?)?.into_vec())
        })
        .collect::<Result<_>>()?;
    let mut h = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            h[i * n + j] = *v;
        }
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub k: usize,
    /// Krylov dimension cap.
    pub max_steps: usize,
    /// Ritz pairs count as converged once `β_j |s_last| < tol·|λ|`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            k: 20,
            max_steps: 500,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub smallest: Vec<f64>,
    pub largest: Vec<f64>,
    pub steps: usize,
    pub mv_products: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Ritz {
    values: Vec<f64>,
    residuals: Vec<f64>,
}

fn ritz(alpha: &[f64], beta: &[f64], beta_last: f64) -> Ritz {
    let j = alpha.len();
    let mut t = vec![0.0; j * j];
    for i in 0..j {
        t[i * j + i] = alpha[i];
        if i + 1 < j {
            t[i * j + i + 1] = beta[i];
            t[(i + 1) * j + i] = beta[i];
        }
    }
    let (values, vectors) = linalg::sym_eigen(j, &t);
    let residuals = vectors.iter().map(|s| (beta_last * s[j - 1]).abs()).collect();
    Ritz { values, residuals }
}

/// Extremal eigenvalues of a symmetric operator by Lanczos with full
/// reorthogonalization.
pub fn lanczos<F>(n: usize, mut apply: F, opts: &LanczosOptions) -> Result<LanczosResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if n == 0 || opts.k == 0 {
        return Err(Error::InvalidConfig("lanczos needs n ≥ 1 and k ≥ 1".into()));
    }
    let max_steps = opts.max_steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut mv = 0;
    let mut scale: f64 = 0.0;
    loop {
        let mut w = apply(&q)?;
        mv += 1;
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        let a = dot(&w, &q);
        basis.push(q);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        scale = scale.max(a.abs()).max(b);
        let steps = alpha.len();
        let invariant = b <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        let done = invariant || steps == max_steps;
        if done || (steps >= 2 * opts.k && steps % 5 == 0) {
            let r = ritz(&alpha, &beta, if invariant { 0.0 } else { b });
            let k = opts.k.min(steps);
            let floor = 1e-8 * r.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let ok = |i: usize| r.residuals[i] < opts.tolerance * r.values[i].abs().max(floor);
            let converged = (0..k).all(ok) && (steps - k..steps).all(ok);
            if converged || done {
                return Ok(LanczosResult {
                    smallest: r.values[..k].to_vec(),
                    largest: r.values[steps - k..].to_vec(),
                    steps,
                    mv_products: mv,
                    converged,
                });
            }
        }
        beta.push(b);
        q = w.into_iter().map(|x| x / b).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: &[f64]) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + '_ {
        move |v| Ok(v.iter().zip(d).map(|(x, l)| x * l).collect())
    }

    #[test]
    fn lanczos_on_a_diagonal_operator() {
        let d: Vec<f64> = (1..=200).map(|i| (i as f64).powi(2)).collect();
        let opts = LanczosOptions { k: 3, ..Default::default() };
        let r = lanczos(d.len(), diag_op(&d), &opts).unwrap();
        assert!(r.converged);
        assert!((r.largest[2] - 40000.0).abs() < 1e-6 * 40000.0);
        assert!((r.largest[1] - 199.0f64.powi(2)).abs() < 1e-4 * 40000.0);
        assert!((r.smallest[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lanczos_exhausts_small_spaces() {
        let d = [3.0, -1.0, 7.0];
        let r = lanczos(3, diag_op(&d), &LanczosOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.smallest.len(), 3);
        assert!((r.smallest[0] + 1.0).abs() < 1e-12);
        assert!((r.largest[2] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn indexed_lanczos_ends() {
        let rep = SpectrumReport {
            spectrum: Spectrum::Lanczos {
                smallest: vec![1.0, 2.0],
                largest: vec![9.0, 10.0],
                converged: true,
            },
            dim: 10,
            mv_products: 0,
            asymmetry: None,
        };
        assert_eq!(rep.indexed(), vec![(0, 1.0), (1, 2.0), (8, 9.0), (9, 10.0)]);
        assert_eq!(rep.lambda_max(), 10.0);
    }
}
