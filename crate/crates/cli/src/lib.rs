//! Experiment runner for the `sdm-core` solvers: argument and config
//! handling, the convergence and heterogeneous studies, single solves and
//! field generation, with CSV and JSON reports.

pub mod args;
pub mod config;
pub mod experiments;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use args::Args;
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] sdm_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use sdm_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                E::Io(_) => EXIT_IO,
                E::InvalidParameter(_) | E::InvalidField { .. } | E::InvalidConfiguration(_) | E::DegenerateDomain(_) | E::Parse { .. } => {
                    EXIT_CONFIG
                }
                E::SolverFailure { .. } | E::IllConditioned { .. } | E::OversamplingSingular { .. } | E::IncompleteAssembly(_) | E::Coverage(_) => {
                    EXIT_SOLVER
                }
            },
        }
    }
}

/// Parses flags, merges the optional config file underneath them, and resolves defaults.
pub fn resolve_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Args::try_parse_from(argv).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    let merged = match &cli.config {
        Some(path) => cli.clone().or(args::read_config(path)?),
        None => cli,
    };
    RunConfig::resolve(merged)
}

/// Runs one invocation and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if let Err(e) = Args::try_parse_from(&argv) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            print!("{e}");
            return EXIT_OK;
        }
    }
    let cfg = match resolve_args(argv) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match experiments::run(&cfg) {
        Ok(out) => {
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if let Some(rep) = &out.report {
                for e in &rep.entries {
                    let r = &e.row;
                    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
                    println!(
                        "{:<4} {:<24} ratio {:>4} unknowns {:>7} rmse_true {:>10} rmse_fdm_cp {:>10} cpu {:.3}s",
                        r.method, r.variant, r.spacing_ratio, r.n_unknowns, fmt(r.rmse_vs_true), fmt(r.rmse_vs_fdm_cp), r.cpu_total_s
                    );
                }
                for s in &rep.slopes {
                    println!("slope {} = {:.3} over {} points", s.method, s.slope, s.n_points);
                }
            }
            if out.solver_failures > 0 {
                EXIT_SOLVER
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
