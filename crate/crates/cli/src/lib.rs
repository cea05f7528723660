//! Batch experiment runner: every subcommand reads a `key=value` config, writes CSV
//! files and a `manifest.txt` into the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 I/O failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod problem;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sdde",
    version,
    about = "Stochastic delay differential equation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (`key=value`, dotted sections).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stability abscissa and rightmost characteristic roots.
    Stability,
    /// Fundamental solution r, its derivative and norms.
    Fundamental,
    /// Sample paths.
    Simulate,
    /// Variation-of-constants refinement study and coupling contraction.
    Verify,
    /// Occupation-measure estimate of the stationary law and tightness diagnostic.
    Stationary,
    /// Analytic against empirical autocovariance.
    Covariance,
    /// Analytic spectral density against the smoothed periodogram.
    Spectrum,
    /// Power-law fit of the stationary law near zero.
    Powerlaw,
    /// Stationary laws of the clamped quadratic-variation equation.
    Nonunique,
    /// Failure of the Feller property before the delay horizon.
    FellerDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Fundamental => "fundamental",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Stationary => "stationary",
            Command::Covariance => "covariance",
            Command::Spectrum => "spectrum",
            Command::Powerlaw => "powerlaw",
            Command::Nonunique => "nonunique",
            Command::FellerDemo => "feller-demo",
        }
    }

    fn run(self, c: &Config) -> Result<commands::Artifacts, CliError> {
        match self {
            Command::Stability => commands::stability(c),
            Command::Fundamental => commands::fundamental(c),
            Command::Simulate => commands::simulate(c),
            Command::Verify => commands::verify(c),
            Command::Stationary => commands::stationary(c),
            Command::Covariance => commands::covariance(c),
            Command::Spectrum => commands::spectrum(c),
            Command::Powerlaw => commands::powerlaw(c),
            Command::Nonunique => commands::nonunique(c),
            Command::FellerDemo => commands::feller_demo(c),
        }
    }
}

/// Config echo that reruns the experiment when passed back as `--config`.
pub fn manifest(command: Command, c: &Config) -> String {
    let mut out = format!(
        "# sdde manifest\n# command: {}\n# sdde-cli {}\n# sdde-core {}\n",
        command.name(),
        env!("CARGO_PKG_VERSION"),
        sdde::VERSION
    );
    let mut echo = c.clone();
    echo.remove("out");
    out.push_str(&echo.to_text());
    out
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the lines meant for stdout.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    if !cfg.has("seed") {
        cfg.set("seed", "0");
    }
    let out = match &cli.out {
        Some(p) => p.clone(),
        None => PathBuf::from(cfg.str("out").unwrap_or("out")),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("`--threads`: must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let artifacts = pool.install(|| cli.command.run(&cfg))?;
    let mut files = artifacts.files;
    files.push(("manifest.txt".to_string(), manifest(cli.command, &cfg)));
    write_all(&out, &files)?;
    Ok(artifacts.stdout)
}

/// Entry point: parses `args`, runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("sdde {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
