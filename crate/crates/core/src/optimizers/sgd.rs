use crate::autodiff::ParamVector;
use crate::error::{Error, Result};

/// `θ − α·grad`
pub fn gd_step(theta: &ParamVector, grad: &ParamVector, alpha: f64, iteration: usize) -> Result<ParamVector> {
    if !grad.is_finite() {
        return Err(Error::NonFiniteGradient { iteration });
    }
    theta.axpy(-alpha, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticLoss;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let th = ParamVector::from_vec(vec![1.5, -2.0]);
        let g = ParamVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(gd_step(&th, &g, 0.3, 0).unwrap(), th);
    }

    #[test]
    fn matches_closed_form_map() {
        let q = QuadraticLoss::stiff(1e-4, 1e4, [0.0, 0.0]).unwrap();
        let th = ParamVector::from_vec(vec![1.0, 1.0]);
        let g = ParamVector::from_vec(q.gradient(th.as_slice()));
        let next = gd_step(&th, &g, 1e-4, 0).unwrap();
        assert_eq!(next.as_slice(), &[1.0 - 1e-8, 0.0]);
        let flip = gd_step(&th, &g, 2e-4, 0).unwrap();
        assert_eq!(flip.as_slice()[1], -1.0);
    }

    #[test]
    fn non_finite_gradient_names_iteration() {
        let th = ParamVector::from_vec(vec![0.0]);
        let g = ParamVector::from_vec(vec![f64::NAN]);
        assert!(matches!(
            gd_step(&th, &g, 0.1, 17),
            Err(Error::NonFiniteGradient { iteration: 17 })
        ));
    }
}
