use isgd::autodiff::ParamVector;
use isgd::network::{build, InitScheme, NetworkConfig};
use isgd::optimizers::{
    igd_exact_quadratic, prox_step, train, InnerSolver, IsgdConfig, NullSink, OptimizerSpec, Phase,
    TailSpec, TrainingTrace,
};
use isgd::problems::{Batch, BatchSpec, Objective, PoissonVariant, Problem, Sampling};
use proptest::prelude::*;

const K1: f64 = 1e-4;
const K2: f64 = 1e4;

fn stiff() -> Problem {
    Problem::quadratic_stiff(K1, K2, [0.0, 0.0]).unwrap()
}

fn small_pinn(batch: BatchSpec) -> (Problem, ParamVector) {
    let (net, theta) = build(NetworkConfig::tanh(1, &[8, 8]), InitScheme::glorot(4)).unwrap();
    let p = Problem::poisson1d(net, PoissonVariant::Smooth, 40, 2, Sampling::Random)
        .unwrap()
        .with_batch(batch)
        .unwrap();
    (p, theta)
}

/// Numeric columns of a trace (everything except wall time).
fn numeric(t: &TrainingTrace) -> Vec<(usize, Phase, u64, u64, Option<u64>)> {
    t.records
        .iter()
        .map(|r| (r.iteration, r.phase, r.loss.to_bits(), r.grad_norm.to_bits(), r.prox_residual.map(f64::to_bits)))
        .collect()
}

#[test]
fn tight_prox_step_matches_exact_implicit_step() {
    let p = stiff();
    let start = [1.0, 1.0];
    for alpha in [1e-4, 1e-2, 1.0, 1e2, 1e4] {
        let theta = ParamVector::from_vec(start.to_vec());
        let s = prox_step(&p, &theta, &Batch::Full, alpha, &InnerSolver::Lbfgs { k1: 200 }, 1e-12).unwrap();
        let exact = igd_exact_quadratic(K1, K2, start, [0.0, 0.0], alpha);
        for i in 0..2 {
            let got = s.theta.as_slice()[i];
            assert!((got - exact[i]).abs() < 1e-9 * exact[i].abs().max(1e-6), "alpha {alpha}: {got} vs {}", exact[i]);
        }
    }
    // α = 1 from (1, 1): offsets (1/(1+1e-4), 1/(1+1e4))
    let e = igd_exact_quadratic(K1, K2, start, [0.0, 0.0], 1.0);
    assert!((e[0] - 0.999_900_009_999).abs() < 1e-12);
    assert!((e[1] - 9.999e-5).abs() < 1e-8);
}

#[test]
fn converged_inner_solves_bound_the_prox_residual() {
    let p = stiff();
    let tol = 1e-9;
    let cfg = IsgdConfig {
        alpha: 10.0,
        k0: 8,
        inner: InnerSolver::Lbfgs { k1: 100 },
        tail: TailSpec::None,
        inner_tolerance: Some(tol),
    };
    let theta0 = ParamVector::from_vec(vec![2.0, -3.0]);
    let (_, trace) = train(&p, &theta0, &OptimizerSpec::Isgd(cfg), &mut NullSink, None).unwrap();
    assert_eq!(trace.records.len(), 8);
    for r in &trace.records {
        // ‖θ_n‖ ≤ ‖θ_0‖ along a contracting trajectory
        assert!(r.prox_residual.unwrap() <= tol * (1.0 + theta0.norm()), "{r:?}");
    }
    let losses = trace.losses();
    assert!(losses.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn no_outer_steps_is_the_tail_optimizer() {
    let (p, theta) = small_pinn(BatchSpec::Full);
    let isgd = OptimizerSpec::Isgd(IsgdConfig {
        alpha: 0.5,
        k0: 0,
        inner: InnerSolver::Adam { lr: 1e-3, k1: 50 },
        tail: TailSpec::Adam { lr: 1e-2, k2: 60 },
        inner_tolerance: None,
    });
    let adam = OptimizerSpec::Adam { lr: 1e-2, iterations: 60 };
    let (a, ta) = train(&p, &theta, &isgd, &mut NullSink, None).unwrap();
    let (b, tb) = train(&p, &theta, &adam, &mut NullSink, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(numeric(&ta), numeric(&tb));
}

#[test]
fn minibatch_isgd_is_deterministic() {
    let (p, theta) = small_pinn(BatchSpec::MiniBatch { size: 10, seed: 3 });
    let spec = OptimizerSpec::Isgd(IsgdConfig {
        alpha: 0.5,
        k0: 6,
        inner: InnerSolver::Adam { lr: 1e-3, k1: 10 },
        tail: TailSpec::Adam { lr: 1e-3, k2: 10 },
        inner_tolerance: None,
    });
    let (a, ta) = train(&p, &theta, &spec, &mut NullSink, None).unwrap();
    let (b, tb) = train(&p, &theta, &spec, &mut NullSink, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(numeric(&ta), numeric(&tb));
    // tail numbering continues from K0
    let its: Vec<usize> = ta.records.iter().map(|r| r.iteration).collect();
    assert_eq!(its, (0..16).collect::<Vec<_>>());
    assert!(ta.phase(Phase::Isgd).all(|r| r.prox_residual.is_some()));
    assert!(ta.phase(Phase::Tail).all(|r| r.prox_residual.is_none()));
}

#[test]
fn exact_prox_trace_is_monotone_near_a_minimum() {
    let (p, theta) = small_pinn(BatchSpec::Full);
    let (theta, _) = train(&p, &theta, &OptimizerSpec::Lbfgs { iterations: 300 }, &mut NullSink, None).unwrap();
    let spec = OptimizerSpec::Isgd(IsgdConfig {
        alpha: 0.5,
        k0: 15,
        inner: InnerSolver::Lbfgs { k1: 50 },
        tail: TailSpec::None,
        inner_tolerance: Some(1e-12),
    });
    let (_, trace) = train(&p, &theta, &spec, &mut NullSink, None).unwrap();
    let l = trace.losses();
    assert!(l.windows(2).skip(1).all(|w| w[1] <= w[0]), "{l:?}");
}

#[test]
fn gd_stability_boundary() {
    let p = stiff();
    let theta0 = ParamVector::from_vec(vec![1.0, 1.0]);
    let run = |alpha: f64| {
        let (_, t) = train(&p, &theta0, &OptimizerSpec::Sgd { lr: alpha, iterations: 100 }, &mut NullSink, None).unwrap();
        t
    };
    let above = run(2.0 / K2 * (1.0 + 1e-3));
    let below = run(2.0 / K2 * (1.0 - 1e-3));
    let (a, b) = (above.losses(), below.losses());
    assert!(a.windows(2).all(|w| w[1] > w[0]));
    assert!(b.last().unwrap() < &b[0]);

    let fast = run(2.5e-4);
    assert!(fast.diverged);
    assert!(fast.records.len() < 100);

    // αK2 = 2 flips the stiff component exactly
    let (_, g) = p.loss_and_grad(&theta0, &Batch::Full).unwrap();
    let next = isgd::optimizers::gd_step(&theta0, &g, 2.0 / K2, 0).unwrap();
    assert_eq!(next.as_slice()[1], -1.0);
}

#[test]
fn empty_schedule_returns_the_start() {
    let (p, theta) = small_pinn(BatchSpec::Full);
    let (t, trace) = train(&p, &theta, &OptimizerSpec::Adam { lr: 0.1, iterations: 0 }, &mut NullSink, None).unwrap();
    assert_eq!(t, theta);
    assert!(trace.is_empty() && !trace.diverged);
}

proptest! {
    #[test]
    fn exact_igd_contracts_at_the_predicted_rate(
        log_alpha in -6.0f64..6.0,
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
    ) {
        prop_assume!(a.abs() + b.abs() > 1e-6);
        let alpha = 10f64.powf(log_alpha);
        let p = stiff();
        let t0 = ParamVector::from_vec(vec![a, b]);
        let t1 = igd_exact_quadratic(K1, K2, [a, b], [0.0, 0.0], alpha);
        let l0 = p.loss(&t0, &Batch::Full).unwrap();
        let l1 = p.loss(&ParamVector::from_vec(t1.to_vec()), &Batch::Full).unwrap();
        let d = (1.0 / (1.0 + alpha * K1)).powi(2).max((1.0 / (1.0 + alpha * K2)).powi(2));
        prop_assert!(l1 <= d * l0 * (1.0 + 1e-15));
        prop_assert!(l1 < l0);
    }
}
