use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use isgd::diagnostics::SpectrumMethod;
use isgd_cli::config::{ExperimentConfig, OUTPUT_ROOT_ENV};
use isgd_cli::{compare, plot, run, theorem};

#[derive(Parser)]
#[command(name = "isgd", version, about = "Train and diagnose PINNs with implicit SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several optimizers on the same problem and tabulate them.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
        /// Run one config at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Hessian spectrum of a saved checkpoint.
    Spectrum {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Lanczos with this many Ritz values per end instead of the config's method.
        #[arg(long)]
        lanczos: Option<usize>,
        #[arg(long)]
        dense: bool,
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
    },
    /// Exact-prox runs of the two-layer convergence bound.
    VerifyTheorem {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format CSV of one or more traces.
    PlotData {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_path());
            let o = run::run_in(&cfg, &dir)?;
            print!("{}", o.summary.render());
            println!("output = {}", o.dir.display());
        }
        Command::Compare { configs, out, sequential } => {
            let cfgs = configs.iter().map(|p| ExperimentConfig::load(p)).collect::<Result<Vec<_>>>()?;
            let out = match std::env::var_os(OUTPUT_ROOT_ENV) {
                Some(root) if !root.is_empty() && !out.is_absolute() => PathBuf::from(root).join(out),
                _ => out,
            };
            let c = compare::compare(&cfgs, &out, !sequential)?;
            print!("{}", c.table);
            println!("curves = {}", c.csv_path.display());
        }
        Command::Spectrum { checkpoint, config, lanczos, dense, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let method = match (lanczos, dense) {
                (Some(_), true) => anyhow::bail!("--dense and --lanczos are exclusive"),
                (Some(k), false) => Some(SpectrumMethod::Lanczos { k }),
                (None, true) => Some(SpectrumMethod::Dense),
                (None, false) => None,
            };
            let r = run::checkpoint_spectrum(&cfg, &checkpoint, method)?;
            r.write_csv(&out)?;
            println!("dim = {}", r.dim);
            println!("lambda_max = {:e}", r.lambda_max());
            println!("lambda_min = {:e}", r.lambda_min());
            if let Some(a) = r.asymmetry {
                println!("asymmetry = {a:e}");
            }
            println!("output = {}", out.display());
        }
        Command::VerifyTheorem { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_path());
            let s = theorem::verify(&cfg.theorem, &dir)?;
            print!("{}", s.render());
        }
        Command::PlotData { traces, out } => {
            let data = plot::plot_data(&traces)?;
            match out {
                Some(p) => std::fs::write(p, data)?,
                None => print!("{data}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
