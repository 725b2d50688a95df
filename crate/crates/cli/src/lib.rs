//! Command-line driver: argument parsing, configuration loading, artifact
//! writing and exit codes. `run` is the whole program; `main` only forwards
//! to it so the integration tests can call it in-process.
//!
//! Exit codes: 0 success, 1 a check or reference comparison failed,
//! 2 bad arguments, configuration or I/O.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};
use sloclab::exponents::GapMode;

use commands::Output;
use config::{CorpusSource, Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Parser)]
#[command(name = "sloclab", version, about = "Stochastic-localization numerics: simulation, inequality checks, exponent arithmetic")]
pub struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the localization process and check its identities.
    Simulate,
    /// Check the inequality corpus.
    Verify(VerifyArgs),
    /// Search for the worst-case one-dimensional skewness ratio.
    GammaSearch(GammaArgs),
    /// Minimize the thin-shell exponent and evaluate the bound chain.
    Exponents(ExponentsArgs),
    /// Run all four in sequence.
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `default` or a path to a corpus JSON file.
    #[arg(long)]
    pub corpus: Option<String>,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExponentsArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `with_gap` or `no_gap`.
    #[arg(long)]
    pub mode: Option<GapMode>,
    /// `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    pub q_range: Option<[f64; 2]>,
    /// Also write the exponents JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected lo,hi, got {s:?}"));
    };
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let (lo, hi) = (p(lo)?, p(hi)?);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need finite lo < hi, got {s:?}"));
    }
    Ok([lo, hi])
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify(_) => "verify",
            Command::GammaSearch(_) => "gamma-search",
            Command::Exponents(_) => "exponents",
            Command::All => "all",
        }
    }
}

/// Configuration file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.output_dir = Some(cli.out.clone());
    match &cli.command {
        Command::Verify(a) => {
            if let Some(c) = &a.corpus {
                cfg.verify.corpus = CorpusSource::Named(c.clone());
            }
        }
        Command::GammaSearch(a) => {
            if let Some(g) = a.grid {
                cfg.gamma_search.grid_resolution = g;
            }
        }
        Command::Exponents(a) => {
            if let Some(g) = a.gamma {
                cfg.exponents.gamma = g;
            }
            if let Some(m) = a.mode {
                cfg.exponents.mode = m;
            }
            if let Some(r) = a.q_range {
                cfg.exponents.q_range = r;
            }
        }
        Command::Simulate | Command::All => {}
    }
    Ok(cfg)
}

/// SHA-256 of the resolved configuration's JSON (output directory excluded).
pub fn config_sha256(cfg: &RunConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match command {
        Command::Simulate => commands::simulate_cmd(cfg),
        Command::Verify(_) => commands::verify_cmd(cfg),
        Command::GammaSearch(_) => commands::gamma_cmd(cfg),
        Command::Exponents(_) => commands::exponents_cmd(cfg),
        Command::All => {
            let mut out = commands::simulate_cmd(cfg)?;
            out.merge(commands::verify_cmd(cfg)?);
            out.merge(commands::gamma_cmd(cfg)?);
            out.merge(commands::exponents_cmd(cfg)?);
            Ok(out)
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_outputs(command: &str, cfg: &RunConfig, out: &Output, dir: &Path, extra_json: Option<&Path>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in &out.artifacts {
        write(&dir.join(name), bytes)?;
    }
    if let Some(path) = extra_json {
        let (_, bytes) = out
            .artifacts
            .iter()
            .find(|(n, _)| n == "exponents.json")
            .ok_or_else(|| CliError::Config("--json needs JSON output (--format json or both)".into()))?;
        write(path, bytes)?;
    }
    let manifest = json!({
        "command": command,
        "config_sha256": config_sha256(cfg)?,
        "seed": cfg.seed,
        "tool_version": commands::TOOL_VERSION,
        "started_at": chrono::Utc::now().to_rfc3339(),
        "artifacts": out.artifacts.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "failures": out.failures,
    });
    let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    write(&dir.join(format!("{command}.manifest.json")), s.as_bytes())
}

fn run_parsed(cli: &Cli) -> Result<i32, CliError> {
    let cfg = resolve_config(cli)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Internal(e.to_string()))?
    };
    let out = pool.install(|| execute(&cli.command, &cfg))?;
    let extra = match &cli.command {
        Command::Exponents(a) => a.json.as_deref(),
        _ => None,
    };
    write_outputs(cli.command.name(), &cfg, &out, &cli.out, extra)?;
    print!("{}", out.summary);
    for f in &out.failures {
        eprintln!("FAIL {f}");
    }
    Ok(if out.failures.is_empty() { 0 } else { 1 })
}

pub fn run<I, T>(args: I) -> i32
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
    match run_parsed(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
