//! `certbound` command-line front end.
//!
//! Every subcommand writes one primary output (stdout, or `--out FILE`)
//! and, when it writes to a file, an [`ExperimentManifest`] next to it.
//! Exit codes: 0 success, 1 usage or validation error, 2 resource limit.

mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use commands::*;
use config::ConfigFile;
pub use manifest::{manifest_path_for, ExperimentManifest, OutputRecord};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "CERTBOUND_THREADS";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Resource(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Resource(_) => 2,
        }
    }
}

impl From<certbound::Error> for CliError {
    fn from(e: certbound::Error) -> Self {
        match e {
            certbound::Error::Resource(m) => CliError::Resource(m),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "certbound",
    version,
    about = "Sample-complexity bounds and simulations for certifying quantum sampling"
)]
pub struct Cli {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub tunables: Tunables,
    #[command(subcommand)]
    pub command: Command,
}

/// Paths; never read from config files.
#[derive(Debug, Clone, Args)]
pub struct IoArgs {
    /// TOML file of `key = value` defaults; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json` when `--out` is set.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Tunables {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores); `CERTBOUND_THREADS` overrides.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norms, entropies and truncations of a distribution.
    Norms(NormsArgs),
    /// Evaluate a sample-complexity bound.
    Bounds(BoundsArgs),
    /// Write the output distribution of one random instance.
    Simulate(SimulateArgs),
    /// Second-moment sweep over qubit counts.
    Moments(MomentsArgs),
    /// Check the min-entropy tail bound on an ensemble.
    TailCheck(TailCheckArgs),
    /// Paley-Zygmund anti-concentration check.
    Anticoncentration(AntiArgs),
    /// Run the calibrated identity test on a samples file.
    Certify(CertifyArgs),
    /// Empirical sample complexity sweep.
    Complexity(ComplexityArgs),
    /// Boson-sampling flatness tail bound sweep.
    BsTail(BsTailArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Norms(_) => "norms",
            Command::Bounds(_) => "bounds",
            Command::Simulate(_) => "simulate",
            Command::Moments(_) => "moments",
            Command::TailCheck(_) => "tail-check",
            Command::Anticoncentration(_) => "anticoncentration",
            Command::Certify(_) => "certify",
            Command::Complexity(_) => "complexity",
            Command::BsTail(_) => "bs-tail",
        }
    }

    fn fill(self, cfg: &mut ConfigFile) -> CliResult<Self> {
        Ok(match self {
            Command::Norms(a) => Command::Norms(cfg.fill(a)?),
            Command::Bounds(a) => Command::Bounds(cfg.fill(a)?),
            Command::Simulate(a) => Command::Simulate(cfg.fill(a)?),
            Command::Moments(a) => Command::Moments(cfg.fill(a)?),
            Command::TailCheck(a) => Command::TailCheck(cfg.fill(a)?),
            Command::Anticoncentration(a) => Command::Anticoncentration(cfg.fill(a)?),
            Command::Certify(a) => Command::Certify(cfg.fill(a)?),
            Command::Complexity(a) => Command::Complexity(cfg.fill(a)?),
            Command::BsTail(a) => Command::BsTail(cfg.fill(a)?),
        })
    }

    fn config_json(&self) -> serde_json::Value {
        let v = match self {
            Command::Norms(a) => serde_json::to_value(a),
            Command::Bounds(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::Moments(a) => serde_json::to_value(a),
            Command::TailCheck(a) => serde_json::to_value(a),
            Command::Anticoncentration(a) => serde_json::to_value(a),
            Command::Certify(a) => serde_json::to_value(a),
            Command::Complexity(a) => serde_json::to_value(a),
            Command::BsTail(a) => serde_json::to_value(a),
        };
        v.unwrap_or(serde_json::Value::Null)
    }

    fn execute(&self, seed: u64) -> CliResult<Outputs> {
        match self {
            Command::Norms(a) => commands::norms(a),
            Command::Bounds(a) => commands::bounds(a),
            Command::Simulate(a) => commands::simulate(a, seed),
            Command::Moments(a) => commands::moments(a, seed),
            Command::TailCheck(a) => commands::tail_check(a, seed),
            Command::Anticoncentration(a) => commands::anticoncentration(a, seed),
            Command::Certify(a) => commands::certify(a, seed),
            Command::Complexity(a) => commands::complexity(a, seed),
            Command::BsTail(a) => commands::bs_tail(a),
        }
    }
}

/// What a command produced: the primary output plus side files it chose
/// the paths of.
#[derive(Debug, Default)]
pub struct Outputs {
    pub primary: Vec<u8>,
    pub extra: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(primary: impl Into<Vec<u8>>) -> Self {
        Self {
            primary: primary.into(),
            extra: Vec::new(),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            CliError::Validation(format!("{THREADS_ENV} = {v:?} is not a thread count"))
        }),
        _ => Ok(flag.unwrap_or(0)),
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let mut cfg = match &cli.io.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let tunables = cfg.fill(cli.tunables)?;
    let command = cli.command.fill(&mut cfg)?;
    cfg.finish()?;

    let seed = tunables.seed.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(tunables.threads)?)
        .build()
        .map_err(|e| CliError::Resource(e.to_string()))?;

    let started = manifest::now();
    let outputs = pool.install(|| command.execute(seed))?;
    let finished = manifest::now();

    let mut records = Vec::new();
    match &cli.io.out {
        Some(path) => {
            std::fs::write(path, &outputs.primary)?;
            records.push(OutputRecord::new(&path.to_string_lossy(), &outputs.primary));
        }
        None => {
            std::io::stdout().write_all(&outputs.primary)?;
            records.push(OutputRecord::new("-", &outputs.primary));
        }
    }
    for (path, bytes) in &outputs.extra {
        std::fs::write(path, bytes)?;
        records.push(OutputRecord::new(&path.to_string_lossy(), bytes));
    }

    let manifest_path = cli
        .io
        .manifest
        .clone()
        .or_else(|| cli.io.out.as_deref().map(manifest_path_for));
    if let Some(path) = manifest_path {
        let mut config = command.config_json();
        if let serde_json::Value::Object(o) = &mut config {
            o.insert("seed".into(), seed.into());
        }
        let m = ExperimentManifest {
            command: command.name().to_string(),
            argv,
            config,
            seed,
            threads: pool.current_num_threads(),
            artifact_version: manifest::ARTIFACT_VERSION.to_string(),
            started,
            finished,
            outputs: records,
        };
        let text =
            serde_json::to_string_pretty(&m).map_err(|e| CliError::Validation(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}
