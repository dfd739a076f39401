//! `gwflow`: run experiments from TOML configs and write CSV artifacts.
//!
//! Exit codes: 0 on success, 2 when the config or arguments are invalid,
//! 3 when `--check` is given and a check fails, 1 on any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gwflow_core::experiment::{parse_config, run, ExperimentConfig, ExperimentKind};
use gwflow_core::Error;

#[derive(Parser)]
#[command(
    name = "gwflow",
    version,
    about = "Simulations and checks for a (2+1)-d crystal growth model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; defaults for the subcommand are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to GWFLOW_THREADS, then to all cores.
    #[arg(long, env = "GWFLOW_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Exit with status 3 if any check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the event-driven simulator and write snapshots and event logs.
    Simulate(Common),
    /// Convergence of rescaled simulations to the PDE solution.
    Hydro(Common),
    /// Stationary ensembles: growth speed, densities, variances, kernel.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Slope as `rho1,rho2`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        rho: Option<Vec<f64>>,
        /// Torus half-sizes as `M,N`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        torus: Option<Vec<i64>>,
        #[arg(long)]
        burn: Option<f64>,
    },
    /// Solve the Hamilton-Jacobi equation on a periodic grid.
    Pde(Common),
    /// Longest light chains in a light square against the tail bound.
    LisBound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        area: Option<f64>,
        /// Largest chain length in the table.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Exact and statistical checks of the microscopic dynamics.
    Axioms(Common),
}

enum Failure {
    Invalid(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Invalid(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let c = parse_config(&text)?;
            if c.kind != kind {
                return Err(Failure::Invalid(format!(
                    "config is for `{}` but the subcommand is `{}`",
                    c.kind.name(),
                    kind.name()
                )));
            }
            c
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(r) = common.replicas {
        config.replicas = Some(r);
    }
    if let Some(o) = &common.out {
        config.out = Some(o.clone());
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    let (kind, common) = match &cli.command {
        Command::Simulate(c) => (ExperimentKind::Simulate, c),
        Command::Hydro(c) => (ExperimentKind::Hydro, c),
        Command::Equilibrium { common, .. } => (ExperimentKind::Equilibrium, common),
        Command::Pde(c) => (ExperimentKind::Pde, c),
        Command::LisBound { common, .. } => (ExperimentKind::LisBound, common),
        Command::Axioms(c) => (ExperimentKind::Axioms, c),
    };
    let mut config = load(kind, common)?;
    match &cli.command {
        Command::Equilibrium {
            rho, torus, burn, ..
        } => {
            let eq = config.equilibrium.as_mut().unwrap();
            if let Some(r) = rho {
                eq.rho = [r[0], r[1]];
            }
            if let Some(t) = torus {
                eq.torus = [t[0], t[1]];
            }
            if let Some(b) = burn {
                eq.burn = *b;
            }
        }
        Command::LisBound { area, k, .. } => {
            let lis = config.lis_bound.as_mut().unwrap();
            if let Some(a) = area {
                lis.area = *a;
            }
            if let Some(k) = k {
                lis.kmax = *k;
            }
        }
        _ => {}
    }
    config.validate()?;
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(Failure::Invalid("threads: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("gwflow-out").join(kind.name()));
    let manifest = run(&config, &out)?;
    for c in &manifest.checks {
        let threshold = c
            .threshold
            .map(|t| format!(" threshold={t}"))
            .unwrap_or_default();
        println!(
            "{} {} value={}{threshold}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value
        );
    }
    println!("outputs written to {}", out.display());
    Ok(!common.check || manifest.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gwflow: checks failed");
            ExitCode::from(3)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("gwflow: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("gwflow: {msg}");
            ExitCode::from(1)
        }
    }
}
