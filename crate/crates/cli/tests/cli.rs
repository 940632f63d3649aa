use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use isgd_cli::compare::compare;
use isgd_cli::config::{ExperimentConfig, ProblemSpec};
use isgd_cli::plot::plot_data;
use isgd_cli::run::{checkpoint_spectrum, run_in, Status};
use isgd::diagnostics::SpectrumMethod;
use isgd::optimizers::OptimizerSpec;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn canned(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(format!("{name}.toml"))).unwrap()
}

fn all_canned() -> Vec<PathBuf> {
    let mut out = Vec::new();
    for dir in [configs_dir(), configs_dir().join("full")] {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "toml") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Trace rows without the wall-time column.
fn numeric_columns(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

fn tiny(name: &str, optimizer: OptimizerSpec) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "name = \"{name}\"\nseed = 3\n[problem]\nkind = \"poisson1d\"\nvariant = \"smooth\"\nn_r = 30\n[network]\nhidden = [6, 6]\n"
    ))
    .map(|mut c| {
        c.optimizer = optimizer;
        c
    })
    .unwrap()
}

#[test]
fn canned_configs_parse_round_trip_and_build() {
    let paths = all_canned();
    assert!(paths.len() >= 40, "{} configs", paths.len());
    for p in paths {
        let cfg = ExperimentConfig::load(&p).unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg, "{}", p.display());
        assert_eq!(p.file_stem().unwrap().to_str().unwrap(), cfg.name);
        if cfg.name.starts_with("theorem") {
            continue;
        }
        let (problem, theta) = cfg.build().unwrap();
        assert!(theta.len() > 0, "{}", problem.name());
    }
}

#[test]
fn full_size_configs_match_iteration_budgets() {
    let ode = canned("full/ode_eps2_isgd_full");
    let OptimizerSpec::Isgd(c) = ode.optimizer else { panic!() };
    assert_eq!(c.alpha, 0.5);
    assert_eq!(c.k0 * c.inner.k1() + c.tail.k2(), 102_000);
    let budgets = [
        ("full/ode_eps2_adam_full", 120_000),
        ("full/ode_eps001_isgd_full", 360_000),
        ("full/ode_eps001_adam_full", 400_000),
        ("full/poisson2d_isgd_full", 1_100_000),
        ("full/poisson2d_adam_full", 2_000_000),
        ("full/helmholtz_isgd_full", 550_000),
        ("full/helmholtz_adam_full", 1_000_000),
    ];
    for (name, total) in budgets {
        let cfg = canned(name);
        let n = match cfg.optimizer {
            OptimizerSpec::Isgd(c) => c.k0 * c.inner.k1() + c.tail.k2(),
            OptimizerSpec::Adam { iterations, .. } => iterations,
            _ => panic!("{name}"),
        };
        assert_eq!(n, total, "{name}");
    }
}

#[test]
fn ode_eps2_isgd_completes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&canned("ode_eps2_isgd"), dir.path()).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("diverged = false"), "{summary}");
    assert_eq!(out.summary.status(), Status::Converged);
    for f in ["trace.csv", "checkpoint.json", "config.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn binary_rejects_misspelled_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"bad\"\n[optimizer]\nkind = \"adam\"\nlearning_rte = 0.1\niterations = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_isgd"))
        .arg("run")
        .arg(&cfg)
        .env("ISGD_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rte") && err.contains("optimizer"), "{err}");
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn binary_honours_output_root_and_records_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_isgd"))
        .arg("run")
        .arg(configs_dir().join("quadratic_stiff_gd.toml"))
        .env("ISGD_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("quadratic_stiff_gd/summary.txt")).unwrap();
    assert!(summary.contains("diverged = true"));
    let rows = fs::read_to_string(dir.path().join("quadratic_stiff_gd/trace.csv")).unwrap().lines().count();
    assert!(rows > 1 && rows <= 201);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny("det", OptimizerSpec::Adam { lr: 1e-2, iterations: 50 });
    cfg.batch = isgd::problems::BatchSpec::MiniBatch { size: 7, seed: 2 };
    cfg.diagnostics.error_every = 10;
    let a = run_in(&cfg, &dir.path().join("a")).unwrap();
    let b = run_in(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(numeric_columns(&a.dir.join("trace.csv")), numeric_columns(&b.dir.join("trace.csv")));
    assert_eq!(
        fs::read(a.dir.join("checkpoint.json")).unwrap(),
        fs::read(b.dir.join("checkpoint.json")).unwrap()
    );
}

#[test]
fn checkpoint_spectrum_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny("spec", OptimizerSpec::Adam { lr: 1e-2, iterations: 20 });
    cfg.diagnostics.spectrum = Some(SpectrumMethod::Dense);
    cfg.diagnostics.spectrum_at = vec![0, 10];
    let out = run_in(&cfg, dir.path()).unwrap();
    assert_eq!(out.spectra.len(), 3);
    for f in ["spectrum_0.csv", "spectrum_10.csv", "spectrum_final.csv"] {
        assert!(dir.path().join(f).exists());
    }
    let r = checkpoint_spectrum(&cfg, &dir.path().join("checkpoint.json"), None).unwrap();
    assert_eq!(r, out.spectra[2].1);

    let mut other = cfg.clone();
    other.network.hidden = vec![5];
    assert!(checkpoint_spectrum(&other, &dir.path().join("checkpoint.json"), None).is_err());
}

#[test]
fn compare_needs_two_configs_on_one_problem() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny("a", OptimizerSpec::Adam { lr: 1e-2, iterations: 5 });
    assert!(compare(std::slice::from_ref(&a), dir.path(), false).is_err());

    let mut b = a.clone();
    b.problem = ProblemSpec::SingularOde { eps: 2.0, n: 30 };
    assert!(compare(&[a.clone(), b], dir.path(), false).is_err());
}

#[test]
fn identical_configs_give_identical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny("same", OptimizerSpec::Adam { lr: 1e-2, iterations: 30 });
    let c = compare(&[a.clone(), a], dir.path(), true).unwrap();
    assert_eq!(c.labels, ["same_0", "same_1"]);
    let text = fs::read_to_string(&c.csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,same_0,same_1"));
    let mut n = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[1], f[2]);
        n += 1;
    }
    assert_eq!(n, 30);
}

#[test]
fn concurrent_compare_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = [
        tiny("sgd", OptimizerSpec::Sgd { lr: 0.5, iterations: 40 }),
        tiny("adam", OptimizerSpec::Adam { lr: 0.5, iterations: 40 }),
        tiny("lbfgs", OptimizerSpec::Lbfgs { iterations: 40 }),
    ];
    let par = compare(&cfgs, &dir.path().join("par"), true).unwrap();
    let seq = compare(&cfgs, &dir.path().join("seq"), false).unwrap();
    assert_eq!(fs::read(&par.csv_path).unwrap(), fs::read(&seq.csv_path).unwrap());
    assert!(par.table.contains("| lbfgs "));
    assert_eq!(par.table.lines().count(), 5);
}

#[test]
fn plot_data_reshapes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("two.csv");
    fs::write(
        &t,
        "iteration,phase,loss,grad_norm,rel_l2_error,prox_residual,elapsed_seconds\n\
         0,isgd,2e0,1e0,5e-1,1e-3,0.1\n\
         1,tail,1e0,5e-1,,,0.2\n",
    )
    .unwrap();
    let out = plot_data(std::slice::from_ref(&t)).unwrap();
    assert_eq!(
        out,
        "series,metric,x,y,log_y\n\
         two,loss,0,2e0,true\ntwo,grad_norm,0,1e0,true\ntwo,rel_l2_error,0,5e-1,true\ntwo,prox_residual,0,1e-3,true\n\
         two,loss,1,1e0,true\ntwo,grad_norm,1,5e-1,true\n"
    );

    let mut traces = Vec::new();
    for name in ["r1", "r2", "r3"] {
        let d = dir.path().join(name);
        fs::create_dir(&d).unwrap();
        fs::copy(&t, d.join("trace.csv")).unwrap();
        traces.push(d.join("trace.csv"));
    }
    let merged = plot_data(&traces).unwrap();
    for name in ["r1", "r2", "r3"] {
        assert_eq!(merged.lines().filter(|l| l.starts_with(&format!("{name},"))).count(), 6);
    }

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "iteration,phase,loss,grad_norm,rel_l2_error,prox_residual,elapsed_seconds\n").unwrap();
    assert!(plot_data(&[empty]).is_err());
}
