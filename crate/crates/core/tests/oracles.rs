//! Derivatives against central finite differences.

use isgd::autodiff::ParamVector;
use isgd::network::{build, Activation, InitScheme, Network, NetworkConfig};
use isgd::problems::{
    Batch, BatchSpec, Objective, PoissonVariant, Problem, Reduction, RegressionTarget, Sampling,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-10)
}

fn net(d: usize, seed: u64) -> Network {
    build(NetworkConfig::tanh(d, &[6, 5]), InitScheme::glorot(seed)).unwrap().0
}

fn problems() -> Vec<Problem> {
    let theorem = build(NetworkConfig::two_layer(2, 8, Activation::Tanh), InitScheme::theorem(1)).unwrap().0;
    vec![
        Problem::quadratic_stiff(1e-4, 1e4, [0.3, -0.7]).unwrap(),
        Problem::poisson1d(net(1, 0), PoissonVariant::Smooth, 15, 1, Sampling::Random).unwrap(),
        Problem::poisson1d(net(1, 0), PoissonVariant::Multiscale, 15, 2, Sampling::Grid).unwrap(),
        Problem::singular_ode(net(1, 1), 2.0, 15, 3).unwrap(),
        Problem::singular_ode(net(1, 1), 0.01, 15, 3).unwrap(),
        Problem::poisson2d(net(2, 2), 8, 12, 4).unwrap(),
        Problem::helmholtz2d(net(2, 2), 4.0, 8, 12, 5).unwrap(),
        Problem::regression(net(1, 3), RegressionTarget::MultiscaleC1, 15, 6).unwrap(),
        Problem::regression(net(1, 3), RegressionTarget::DiscontinuousC2, 15, 6)
            .unwrap()
            .with_batch(BatchSpec::MiniBatch { size: 4, seed: 1 })
            .unwrap(),
        Problem::regression_data(
            theorem,
            vec![1.0, 0.0, 0.6, 0.8, -0.8, 0.6],
            vec![0.5, -0.2, 0.9],
            Reduction::HalfSum,
        )
        .unwrap(),
    ]
}

/// θ0 of the problem's network with a seeded perturbation.
fn random_theta(p: &Problem, rng: &mut ChaCha8Rng) -> ParamVector {
    let base = match p.network() {
        Some(n) => build(n.config().clone(), n.init()).unwrap().1,
        None => ParamVector::from_vec(vec![0.0, 0.0]),
    };
    let data = base.as_slice().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    base.with_data(data).unwrap()
}

/// Loss values reach 1e6 on the multiscale problems, where a 1e-5 step is
/// roundoff-bound; a wider fourth-order stencil keeps both error terms small.
fn fd_gradient(p: &Problem, theta: &ParamVector, batch: &Batch) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let h = 100.0 * step(theta.as_slice()[i]);
            let at = |dx: f64| {
                let mut t = theta.clone();
                t.as_mut_slice()[i] += dx;
                p.loss(&t, batch).unwrap()
            };
            (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
        })
        .collect()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in problems() {
        for k in 0..20 {
            let theta = random_theta(&p, &mut rng);
            let batch = p.batch(k).unwrap();
            let (l, g) = p.loss_and_grad(&theta, &batch).unwrap();
            assert_eq!(l, p.loss(&theta, &batch).unwrap());
            let fd = fd_gradient(&p, &theta, &batch);
            let e = rel_err(g.as_slice(), &fd);
            assert!(e < 1e-6, "{} draw {k}: gradient error {e:e}", p.name());
        }
    }
}

#[test]
fn hvps_match_finite_differences_of_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for p in problems() {
        for k in 0..20 {
            let theta = random_theta(&p, &mut rng);
            let v: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = theta.with_data(v).unwrap();
            let hv = p.hvp(&theta, &v).unwrap();
            let h = 1e-5 * theta.as_slice().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            let gp = p.loss_and_grad(&theta.axpy(h, &v).unwrap(), &Batch::Full).unwrap().1;
            let gm = p.loss_and_grad(&theta.axpy(-h, &v).unwrap(), &Batch::Full).unwrap().1;
            let fd: Vec<f64> = gp.as_slice().iter().zip(gm.as_slice()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let e = rel_err(hv.as_slice(), &fd);
            assert!(e < 1e-6, "{} draw {k}: hvp error {e:e}", p.name());

            // linear in v
            let hv2 = p.hvp(&theta, &v.scaled(-2.5)).unwrap();
            let e = rel_err(hv2.as_slice(), hv.scaled(-2.5).as_slice());
            assert!(e < 1e-12, "{}: hvp not linear ({e:e})", p.name());
        }
    }
}

#[test]
fn input_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let nets = [
        net(1, 5),
        net(2, 6),
        build(NetworkConfig::two_layer(2, 7, Activation::Tanh), InitScheme::theorem(2)).unwrap().0,
        build(NetworkConfig::tanh(3, &[4, 4, 4]), InitScheme::glorot(7)).unwrap().0,
    ];
    for n in &nets {
        let d = n.input_dim();
        let p0 = build(n.config().clone(), n.init()).unwrap().1;
        for k in 0..20 {
            let data = p0.as_slice().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
            let theta = p0.with_data(data).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            for axis in 0..d {
                let h = step(x[axis]);
                let at = |dx: f64| {
                    let mut y = x.clone();
                    y[axis] += dx;
                    n.input_derivatives(&theta, &y, 2, axis).unwrap()
                };
                let (u, du, d2u) = at(0.0);
                let (up, dup, _) = at(h);
                let (um, dum, _) = at(-h);
                assert!((u - n.forward(&theta, &x).unwrap()[0]).abs() < 1e-14);
                let e1 = rel_err(&[du], &[(up - um) / (2.0 * h)]);
                let e2 = rel_err(&[d2u], &[(dup - dum) / (2.0 * h)]);
                assert!(e1 < 1e-6, "draw {k} axis {axis}: first derivative error {e1:e}");
                assert!(e2 < 1e-5, "draw {k} axis {axis}: second derivative error {e2:e}");
            }
        }
    }
}

