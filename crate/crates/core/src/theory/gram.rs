use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::autodiff::{BlockKind, ParamVector};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{Activation, Network, OutputScaling};

/// Independent Monte-Carlo streams; fixed so results do not depend on the
/// thread count.
const MC_STREAMS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GramSource {
    Empirical,
    Limit { mc_samples: usize, seed: u64 },
}

/// Symmetric `N × N` Gram matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    /// Per-entry Monte-Carlo standard errors (limit matrices only).
    pub std_errors: Option<Vec<f64>>,
    pub source: GramSource,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(self.n, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Frobenius norm of the entry standard errors, which bounds the
    /// eigenvalue perturbation they represent.
    pub fn eigenvalue_std_error(&self) -> Option<f64> {
        self.std_errors.as_ref().map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H_ij = (1/m) x_iᵀx_j Σ_r a_r² σ'(w_rᵀx_i) σ'(w_rᵀx_j)` for the two-layer
/// network with frozen output weights.
pub fn gram_empirical(net: &Network, theta: &ParamVector, inputs: &[f64]) -> Result<GramMatrix> {
    let cfg = net.config();
    let (Some(a), [m]) = (net.frozen_output(), cfg.hidden_widths.as_slice()) else {
        return Err(Error::Unsupported("Gram matrix needs the two-layer theorem network".into()));
    };
    if cfg.output_dim != 1 || cfg.output_scaling != OutputScaling::InvSqrtM {
        return Err(Error::Unsupported("Gram matrix needs a scalar 1/√m output".into()));
    }
    let (m, d) = (*m, cfg.input_dim);
    let w = theta.block(0, BlockKind::Weight).ok_or(Error::Missing("hidden weights"))?;
    if inputs.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d * (inputs.len() / d + 1),
            got: inputs.len(),
        });
    }
    let xs: Vec<&[f64]> = inputs.chunks(d).collect();
    let n = xs.len();
    // σ'(w_rᵀx_i) for all r, i
    let s: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| w.chunks(d).map(|wr| cfg.activation.derivative(dot(wr, x))).collect())
        .collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let sum: f64 = (0..m).map(|r| a[r] * a[r] * s[i][r] * s[j][r]).sum();
            let h = dot(xs[i], xs[j]) * sum / m as f64;
            entries[i * n + j] = h;
            entries[j * n + i] = h;
        }
    }
    Ok(GramMatrix {
        n,
        entries,
        std_errors: None,
        source: GramSource::Empirical,
    })
}

/// Monte-Carlo estimate of `H∞_ij = x_iᵀx_j E_{w~N(0,I)} σ'(wᵀx_i) σ'(wᵀx_j)`.
pub fn gram_limit(inputs: &[f64], dim: usize, activation: Activation, mc_samples: usize, seed: u64) -> Result<GramMatrix> {
    if mc_samples < 2 || dim == 0 || inputs.len() % dim != 0 {
        return Err(Error::InvalidConfig("gram_limit needs ≥ 2 samples and N × dim inputs".into()));
    }
    let xs: Vec<&[f64]> = inputs.chunks(dim).collect();
    let n = xs.len();
    let per = mc_samples as u64 / MC_STREAMS;
    let extra = mc_samples as u64 % MC_STREAMS;
    // per-stream sums of σ'σ' and its square over the upper triangle
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..MC_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let count = per + u64::from(stream < extra);
            let mut sum = vec![0.0; n * n];
            let mut sq = vec![0.0; n * n];
            let mut w = vec![0.0; dim];
            let mut s = vec![0.0; n];
            for _ in 0..count {
                w.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                for (si, x) in s.iter_mut().zip(&xs) {
                    *si = activation.derivative(dot(&w, x));
                }
                for i in 0..n {
                    for j in i..n {
                        let v = s[i] * s[j];
                        sum[i * n + j] += v;
                        sq[i * n + j] += v * v;
                    }
                }
            }
            (sum, sq)
        })
        .collect();
    let total = mc_samples as f64;
    let mut entries = vec![0.0; n * n];
    let mut std_errors = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = i * n + j;
            let sum: f64 = parts.iter().map(|p| p.0[k]).sum();
            let sq: f64 = parts.iter().map(|p| p.1[k]).sum();
            let mean = sum / total;
            let var = ((sq - total * mean * mean) / (total - 1.0)).max(0.0);
            let g = dot(xs[i], xs[j]);
            let (h, se) = (g * mean, g.abs() * (var / total).sqrt());
            entries[k] = h;
            entries[j * n + i] = h;
            std_errors[k] = se;
            std_errors[j * n + i] = se;
        }
    }
    Ok(GramMatrix {
        n,
        entries,
        std_errors: Some(std_errors),
        source: GramSource::Limit { mc_samples, seed },
    })
}
