//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isgd::autodiff::ParamVector;
use isgd::diagnostics::SpectrumMethod;
use isgd::network::{build, Activation, InitKind, InitScheme, Network, NetworkConfig, OutputScaling};
use isgd::optimizers::OptimizerSpec;
use isgd::problems::{BatchSpec, PoissonVariant, Problem, RegressionTarget, Sampling};
use serde::{Deserialize, Serialize};

/// Overrides the directory runs are written under.
pub const OUTPUT_ROOT_ENV: &str = "ISGD_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Seeds collocation sampling and, unless the network section names its
    /// own, weight initialization.
    pub seed: u64,
    /// Defaults to `runs/<name>`.
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    /// Mini-batching over interior points or samples.
    pub batch: BatchSpec,
    pub network: NetworkSection,
    pub optimizer: OptimizerSpec,
    pub diagnostics: DiagnosticsConfig,
    pub theorem: TheoremConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            output_dir: None,
            problem: ProblemSpec::default(),
            batch: BatchSpec::Full,
            network: NetworkSection::default(),
            optimizer: OptimizerSpec::Adam {
                lr: 1e-3,
                iterations: 1000,
            },
            diagnostics: DiagnosticsConfig::default(),
            theorem: TheoremConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ProblemSpec {
    Poisson1d {
        variant: PoissonVariant,
        #[serde(default = "defaults::n_r")]
        n_r: usize,
        #[serde(default)]
        sampling: Sampling,
    },
    SingularOde {
        eps: f64,
        #[serde(default = "defaults::n_ode")]
        n: usize,
    },
    Poisson2d {
        #[serde(default = "defaults::n_b")]
        n_b: usize,
        #[serde(default = "defaults::n_f")]
        n_f: usize,
    },
    Helmholtz2d {
        #[serde(default = "defaults::k")]
        k: f64,
        #[serde(default = "defaults::n_b")]
        n_b: usize,
        #[serde(default = "defaults::n_f")]
        n_f: usize,
    },
    Regression {
        target: RegressionTarget,
        #[serde(default = "defaults::n_regression")]
        n: usize,
    },
    QuadraticStiff {
        #[serde(default = "defaults::k1")]
        k1: f64,
        #[serde(default = "defaults::k2")]
        k2: f64,
        #[serde(default)]
        theta_star: [f64; 2],
        #[serde(default = "defaults::theta0")]
        theta0: [f64; 2],
    },
}

mod defaults {
    pub fn n_r() -> usize {
        1000
    }
    pub fn n_ode() -> usize {
        400
    }
    pub fn n_b() -> usize {
        400
    }
    pub fn n_f() -> usize {
        4000
    }
    pub fn k() -> f64 {
        4.0
    }
    pub fn n_regression() -> usize {
        1000
    }
    pub fn k1() -> f64 {
        1e-4
    }
    pub fn k2() -> f64 {
        1e4
    }
    pub fn theta0() -> [f64; 2] {
        [1.0, 1.0]
    }
    pub fn hidden() -> Vec<usize> {
        vec![50, 50, 50, 50]
    }
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Poisson1d {
            variant: PoissonVariant::Smooth,
            n_r: defaults::n_r(),
            sampling: Sampling::Random,
        }
    }
}

impl ProblemSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            ProblemSpec::Poisson2d { .. } | ProblemSpec::Helmholtz2d { .. } => 2,
            ProblemSpec::QuadraticStiff { .. } => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init: InitKind,
    /// Falls back to the global seed.
    pub seed: Option<u64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: defaults::hidden(),
            activation: Activation::Tanh,
            init: InitKind::GlorotUniform,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Hessian spectrum method; off when absent.
    pub spectrum: Option<SpectrumMethod>,
    /// Iterations at which the spectrum is taken; the final point is always
    /// included when a method is set.
    pub spectrum_at: Vec<usize>,
    /// Relative L2 error every this many iterations (0 = final only).
    pub error_every: usize,
    /// Also write the training data as `dataset.csv`.
    pub export_dataset: bool,
}

/// Parameters of `verify-theorem`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConfig {
    /// Unit vectors in the plane at angles kπ/N.
    pub n_points: usize,
    pub width: usize,
    /// α = alpha_scale · λ0 / N².
    pub alpha_scale: f64,
    pub lambda0_samples: usize,
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub lemmas: bool,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self {
            n_points: 5,
            width: 10_000,
            alpha_scale: 0.1,
            lambda0_samples: 1_000_000,
            steps: 200,
            seeds: (0..10).collect(),
            lemmas: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Parses TOML; errors name the offending field path.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.into_inner().message().trim())
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// `$ISGD_OUTPUT_ROOT/<name>` when the variable is set, else the
    /// configured directory or `runs/<name>`.
    pub fn output_path(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.name),
            _ => self
                .output_dir
                .clone()
                .unwrap_or_else(|| Path::new("runs").join(&self.name)),
        }
    }

    pub fn network_config(&self) -> Option<NetworkConfig> {
        let d = self.problem.input_dim();
        if d == 0 {
            return None;
        }
        let n = &self.network;
        let mut cfg = NetworkConfig {
            input_dim: d,
            hidden_widths: n.hidden.clone(),
            output_dim: 1,
            activation: n.activation,
            output_scaling: OutputScaling::None,
        };
        if n.init == InitKind::TheoremInit {
            cfg.output_scaling = OutputScaling::InvSqrtM;
        }
        Some(cfg)
    }

    pub fn init_scheme(&self) -> InitScheme {
        InitScheme {
            kind: self.network.init,
            seed: self.network.seed.unwrap_or(self.seed),
        }
    }

    /// Problem and initial parameters.
    pub fn build(&self) -> Result<(Problem, ParamVector)> {
        match self.network_config() {
            None => {
                let ProblemSpec::QuadraticStiff { k1, k2, theta_star, theta0 } = self.problem else {
                    unreachable!("only the quadratic has no network")
                };
                let p = Problem::quadratic_stiff(k1, k2, theta_star)?;
                Ok((p, ParamVector::from_vec(theta0.to_vec())))
            }
            Some(cfg) => {
                let (net, theta) = build(cfg, self.init_scheme())?;
                Ok((self.problem_with(net)?, theta))
            }
        }
    }

    /// The configured problem around an existing network.
    pub fn problem_with(&self, net: Network) -> Result<Problem> {
        let seed = self.seed;
        let p = match self.problem {
            ProblemSpec::Poisson1d { variant, n_r, sampling } => Problem::poisson1d(net, variant, n_r, seed, sampling)?,
            ProblemSpec::SingularOde { eps, n } => Problem::singular_ode(net, eps, n, seed)?,
            ProblemSpec::Poisson2d { n_b, n_f } => Problem::poisson2d(net, n_b, n_f, seed)?,
            ProblemSpec::Helmholtz2d { k, n_b, n_f } => Problem::helmholtz2d(net, k, n_b, n_f, seed)?,
            ProblemSpec::Regression { target, n } => Problem::regression(net, target, n, seed)?,
            ProblemSpec::QuadraticStiff { .. } => bail!("the quadratic problem has no network"),
        };
        Ok(p.with_batch(self.batch)?)
    }

    /// Total optimizer iterations as recorded in the trace.
    pub fn iterations(&self) -> usize {
        match self.optimizer {
            OptimizerSpec::Sgd { iterations, .. }
            | OptimizerSpec::Adam { iterations, .. }
            | OptimizerSpec::Lbfgs { iterations } => iterations,
            OptimizerSpec::Isgd(c) => c.k0 + c.tail.k2(),
        }
    }
}
