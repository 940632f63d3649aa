use crate::autodiff::{Scalar, ScalarLoss, Tape, Var};
use crate::error::{Error, Result};

/// `L(θ) = Σ_i (K_i/2)(θ_i − θ*_i)²`, a separable quadratic with Hessian
/// `diag(K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLoss {
    pub k: Vec<f64>,
    pub theta_star: Vec<f64>,
}

impl QuadraticLoss {
    pub fn new(k: Vec<f64>, theta_star: Vec<f64>) -> Result<Self> {
        if k.len() != theta_star.len() {
            return Err(Error::DimensionMismatch {
                expected: k.len(),
                got: theta_star.len(),
            });
        }
        if k.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidConfig("curvatures must be positive".into()));
        }
        Ok(Self { k, theta_star })
    }

    /// The two-parameter stiff loss.
    pub fn stiff(k1: f64, k2: f64, theta_star: [f64; 2]) -> Result<Self> {
        Self::new(vec![k1, k2], theta_star.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.k
            .iter()
            .zip(theta.iter().zip(&self.theta_star))
            .map(|(k, (t, s))| 0.5 * k * (t - s) * (t - s))
            .sum()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.k
            .iter()
            .zip(theta.iter().zip(&self.theta_star))
            .map(|(k, (t, s))| k * (t - s))
            .collect()
    }

    /// Hessian eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut k = self.k.clone();
        k.sort_by(f64::total_cmp);
        k
    }

    /// Explicit step `θ − α∇L(θ)`: offsets scale by `1 − αK_i`.
    pub fn gd_map(&self, theta: &[f64], alpha: f64) -> Vec<f64> {
        self.k
            .iter()
            .zip(theta.iter().zip(&self.theta_star))
            .map(|(k, (t, s))| s + (1.0 - alpha * k) * (t - s))
            .collect()
    }

    /// Implicit step solving `θ' = θ − α∇L(θ')`: offsets scale by `1/(1 + αK_i)`.
    pub fn igd_map(&self, theta: &[f64], alpha: f64) -> Vec<f64> {
        self.k
            .iter()
            .zip(theta.iter().zip(&self.theta_star))
            .map(|(k, (t, s))| s + (t - s) / (1.0 + alpha * k))
            .collect()
    }

    /// `max_i (1 − αK_i)²`
    pub fn gd_rate(&self, alpha: f64) -> f64 {
        self.k
            .iter()
            .map(|k| (1.0 - alpha * k).powi(2))
            .fold(0.0, f64::max)
    }

    /// `max_i 1/(1 + αK_i)²`
    pub fn igd_rate(&self, alpha: f64) -> f64 {
        self.k
            .iter()
            .map(|k| (1.0 + alpha * k).powi(-2))
            .fold(0.0, f64::max)
    }
}

impl ScalarLoss for QuadraticLoss {
    fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var) -> Result<Var> {
        let n = self.dim();
        if tape.shape(theta).0 != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: tape.shape(theta).0,
            });
        }
        let star = tape.constant(n, 1, &self.theta_star);
        let half_k: Vec<f64> = self.k.iter().map(|k| 0.5 * k).collect();
        let w = tape.constant(n, 1, &half_k);
        let d = tape.sub(theta, star);
        let sq = tape.square(d);
        let weighted = tape.mul(w, sq);
        Ok(tape.sum(weighted))
    }
}

/// Implicit step on a diagonal quadratic, `θ'_i − θ*_i = (θ_i − θ*_i)/(1 + αK_i)`.
pub fn igd_exact_quadratic(k1: f64, k2: f64, theta: [f64; 2], theta_star: [f64; 2], alpha: f64) -> [f64; 2] {
    [
        theta_star[0] + (theta[0] - theta_star[0]) / (1.0 + alpha * k1),
        theta_star[1] + (theta[1] - theta_star[1]) / (1.0 + alpha * k2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad, hvp, ParamVector};

    #[test]
    fn stiff_gradient_at_unit_offset() {
        let q = QuadraticLoss::stiff(1e-4, 1e4, [0.0, 0.0]).unwrap();
        let (l, g) = grad(&q, &ParamVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(g.as_slice(), &[1e-4, 1e4]);
        assert_eq!(l, 0.5 * (1e-4 + 1e4));
        let (l0, g0) = grad(&q, &ParamVector::from_vec(vec![0.0, 0.0])).unwrap();
        assert_eq!((l0, g0.as_slice()), (0.0, &[0.0, 0.0][..]));
    }

    #[test]
    fn hessian_is_diagonal() {
        let q = QuadraticLoss::stiff(1e-4, 1e4, [0.3, -0.2]).unwrap();
        let th = ParamVector::from_vec(vec![5.0, 7.0]);
        let e1 = hvp(&q, &th, &ParamVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(e1.as_slice(), &[1e-4, 0.0]);
        let ones = hvp(&q, &th, &ParamVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(ones.as_slice(), &[1e-4, 1e4]);
    }

    #[test]
    fn closed_form_maps() {
        let q = QuadraticLoss::stiff(1e-4, 1e4, [0.0, 0.0]).unwrap();
        let gd = q.gd_map(&[1.0, 1.0], 1e-4);
        assert_eq!(gd, vec![1.0 - 1e-8, 0.0]);
        let flip = q.gd_map(&[0.0, 1.0], 2e-4);
        assert_eq!(flip[1], -1.0);
        assert_eq!(igd_exact_quadratic(1e-4, 1e4, [1.0, 1.0], [0.0, 0.0], 1e-4)[1], 0.5);
        let one = igd_exact_quadratic(1e-4, 1e4, [1.0, 1.0], [0.0, 0.0], 1.0);
        assert!((one[0] - 1.0 / 1.0001).abs() < 1e-16);
        assert!((one[1] - 1.0 / 10001.0).abs() < 1e-19);
        assert_eq!(q.eigenvalues(), vec![1e-4, 1e4]);
    }
}
