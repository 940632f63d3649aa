use isgd::autodiff::ParamVector;
use isgd::diagnostics::{
    gd_decay_identity, hessian_spectrum, igd_decay_identity, solution_error, Spectrum, SpectrumMethod,
};
use isgd::network::{build, InitScheme, NetworkConfig};
use isgd::problems::{PoissonVariant, Problem, QuadraticLoss, Sampling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pinn(variant: PoissonVariant, hidden: &[usize]) -> (Problem, ParamVector) {
    let (net, theta) = build(NetworkConfig::tanh(1, hidden), InitScheme::glorot(2)).unwrap();
    (Problem::poisson1d(net, variant, 50, 1, Sampling::Random).unwrap(), theta)
}

#[test]
fn lanczos_agrees_with_dense() {
    for variant in [PoissonVariant::Smooth, PoissonVariant::Multiscale] {
        let (p, theta) = pinn(variant, &[12, 12]);
        let dense = hessian_spectrum(&p, &theta, SpectrumMethod::Dense).unwrap();
        let lz = hessian_spectrum(&p, &theta, SpectrumMethod::Lanczos { k: 5 }).unwrap();
        let Spectrum::Lanczos { converged, .. } = lz.spectrum else { panic!() };
        assert!(converged);
        let scale = dense.lambda_max().abs();
        assert!((lz.lambda_max() - dense.lambda_max()).abs() < 1e-4 * scale, "{variant:?}");
        assert!((lz.lambda_min() - dense.lambda_min()).abs() < 1e-4 * scale, "{variant:?}");
        assert!(dense.asymmetry.unwrap() < 1e-8);
        assert_eq!(dense.dim, theta.len());
    }
}

#[test]
fn multiscale_forcing_stiffens_the_hessian() {
    let (s, theta) = pinn(PoissonVariant::Smooth, &[10]);
    let (m, _) = pinn(PoissonVariant::Multiscale, &[10]);
    let ls = hessian_spectrum(&s, &theta, SpectrumMethod::Dense).unwrap().lambda_max();
    let lm = hessian_spectrum(&m, &theta, SpectrumMethod::Dense).unwrap().lambda_max();
    assert!(lm > ls);
}

#[test]
fn relative_error_of_a_constant_shift() {
    // u = sin(πx) sin(πy) on the 101×101 grid; Σ sin²(πi/100) = 50 per axis
    let g: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let exact: Vec<f64> = g
        .iter()
        .flat_map(|&x| g.iter().map(move |&y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()))
        .collect();
    let pred: Vec<f64> = exact.iter().map(|u| u + 0.01).collect();
    let e = solution_error(&pred, &exact);
    assert!((e.rel_l2 - 0.0202).abs() < 1e-12, "{}", e.rel_l2);
    assert!((e.max_abs - 0.01).abs() < 1e-15);
}

/// Curvatures, steps and coordinates are short dyadic rationals, so both
/// maps are exact in floating point and the draws test the identities rather
/// than the rounding of `θ_{n+1}`.
#[test]
fn decay_identities_are_exact_on_quadratics() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let dyadic = |rng: &mut ChaCha8Rng| rng.random_range(-1024i32..=1024) as f64 / 256.0;
    let mut igd_negative = 0;
    for draw in 0..100 {
        let d = rng.random_range(1..=6);
        let k: Vec<f64> = (0..d).map(|_| 2f64.powi(rng.random_range(-13..=13))).collect();
        let star: Vec<f64> = (0..d).map(|_| dyadic(&mut rng)).collect();
        let alpha = 2f64.powi(rng.random_range(-20..=6));
        let q = QuadraticLoss::new(k.clone(), star.clone()).unwrap();
        let p = Problem::quadratic(q.clone());

        let theta: Vec<f64> = (0..d).map(|_| dyadic(&mut rng)).collect();
        let t0 = ParamVector::from_vec(theta.clone());
        let gd = gd_decay_identity(&p, &t0, &ParamVector::from_vec(q.gd_map(&theta, alpha)), alpha).unwrap();
        assert!(gd.exact);
        assert!(gd.residual < 1e-10, "draw {draw} GD: {gd:?}");

        // θ_n = θ_{n+1} + α∇L(θ_{n+1}) inverts the implicit step exactly
        let next: Vec<f64> = (0..d).map(|_| dyadic(&mut rng)).collect();
        let prev: Vec<f64> = (0..d).map(|i| next[i] + alpha * k[i] * (next[i] - star[i])).collect();
        assert_eq!(q.igd_map(&prev, alpha), next);
        let igd = igd_decay_identity(&p, &ParamVector::from_vec(prev), &ParamVector::from_vec(next.clone()), alpha).unwrap();
        assert!(igd.residual < 1e-10, "draw {draw} IGD: {igd:?}");
        let g = q.gradient(&next);
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-12 {
            assert!(igd.rhs < 0.0, "draw {draw}: {igd:?}");
            igd_negative += 1;
        }
    }
    assert!(igd_negative > 90);
}
