use isgd::autodiff::ParamVector;
use isgd::network::{build, Activation, InitScheme, NetworkConfig};
use isgd::problems::{Batch, Objective, Problem, Reduction};
use isgd::theory::{circle_data, gram_empirical, gram_limit, TheoremInstance};

/// `E[sech⁴ Z]`, `Z ~ N(0, 1)`, by adaptive quadrature in extended precision.
const SECH4_GAUSS: f64 = 0.464_402_902_448_268_26;

/// Composite Simpson on [−12, 12].
fn sech4_gauss_simpson() -> f64 {
    let n = 24_000;
    let (a, b) = (-12.0f64, 12.0f64);
    let h = (b - a) / n as f64;
    let f = |z: f64| z.cosh().powi(-4) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn limit_diagonal_matches_quadrature() {
    assert!((sech4_gauss_simpson() - SECH4_GAUSS).abs() < 1e-12);
    let inputs = [1.0, 0.0, 0.0, 1.0];
    let h = gram_limit(&inputs, 2, Activation::Tanh, 200_000, 7).unwrap();
    let se = h.std_errors.as_ref().unwrap();
    for i in 0..2 {
        let d = (h.get(i, i) - SECH4_GAUSS).abs();
        assert!(d < 5.0 * se[i * 2 + i], "entry {i}: off by {d:e}, se {:e}", se[i * 2 + i]);
    }
    // orthogonal inputs: the x_i·x_j factor vanishes
    assert_eq!(h.get(0, 1), 0.0);
}

#[test]
fn limit_is_symmetric_psd_and_seed_stable() {
    let (inputs, _) = circle_data(5);
    let h = gram_limit(&inputs, 2, Activation::Tanh, 50_000, 1).unwrap();
    assert_eq!(h.max_asymmetry(), 0.0);
    assert!(h.min_eigenvalue() > 0.0);
    let again = gram_limit(&inputs, 2, Activation::Tanh, 50_000, 1).unwrap();
    assert_eq!(h, again);
}

#[test]
fn circle_data_has_a_resolved_positive_lambda0() {
    let (inputs, _) = circle_data(5);
    let h = gram_limit(&inputs, 2, Activation::Tanh, 1_000_000, 0).unwrap();
    let se = h.eigenvalue_std_error().unwrap();
    assert!(h.min_eigenvalue() > 10.0 * se, "λ0 = {:e}, se = {se:e}", h.min_eigenvalue());
}

#[test]
fn wide_network_gram_approaches_the_limit() {
    let (inputs, _) = circle_data(4);
    let m = 100_000;
    let (net, theta) = build(NetworkConfig::two_layer(2, m, Activation::Tanh), InitScheme::theorem(3)).unwrap();
    let emp = gram_empirical(&net, &theta, &inputs).unwrap();
    let lim = gram_limit(&inputs, 2, Activation::Tanh, m, 11).unwrap();
    let se = lim.std_errors.as_ref().unwrap();
    for (k, ((e, l), s)) in emp.entries.iter().zip(&lim.entries).zip(se).enumerate() {
        // both are means over m independent Gaussian draws
        let combined = s * 2f64.sqrt();
        assert!((e - l).abs() < 5.0 * combined.max(1e-12), "entry {k}: {e} vs {l} (se {s:e})");
    }
}

#[test]
fn empirical_gram_is_the_gradient_inner_product() {
    let (inputs, _) = circle_data(3);
    let (net, theta) = build(NetworkConfig::two_layer(2, 40, Activation::Tanh), InitScheme::theorem(5)).unwrap();
    let u = net.forward_batch(&theta, &inputs).unwrap();
    // ∇_θ ½(y − u)² = ∇u when y = u − 1
    let grads: Vec<ParamVector> = (0..3)
        .map(|i| {
            let p = Problem::regression_data(net.clone(), inputs[2 * i..2 * i + 2].to_vec(), vec![u[i] - 1.0], Reduction::HalfSum)
                .unwrap();
            p.loss_and_grad(&theta, &Batch::Full).unwrap().1
        })
        .collect();
    let h = gram_empirical(&net, &theta, &inputs).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let g = grads[i].dot(&grads[j]).unwrap();
            assert!((h.get(i, j) - g).abs() < 1e-10 * g.abs().max(1.0), "({i},{j}): {} vs {g}", h.get(i, j));
        }
    }
}

#[test]
fn parallel_inputs_are_rejected() {
    let inputs = vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0];
    assert!(TheoremInstance::new(inputs, vec![0.0; 3], 2, 100, 0.1, 0.1, 0).is_err());
    let (inputs, labels) = circle_data(5);
    assert!(TheoremInstance::new(inputs, labels, 2, 100, 0.1, 0.1, 0).is_ok());
}
