use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use crate::config::ExperimentConfig;
use crate::error::{ConfigError, RunError};
use crate::experiments::{self, Outcome, Subcommand};
use crate::manifest::{sha256_hex, Manifest, OutputEntry};

#[derive(Debug, Parser)]
#[command(name = "spme", version, about = "Simulate and check stochastic porous-medium equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Simulate path 0 (and ensemble statistics when ensemble_size >= 2).
    Simulate(RunArgs),
    /// Certify the drift and noise conditions on sample grids.
    CheckConditions(RunArgs),
    /// Check the Itô formula for the squared H-norm.
    ItoCheck(RunArgs),
    /// Fit the decay rate of paired paths on common noise.
    Contraction(RunArgs),
    /// Check the a-priori energy inequality.
    Energy(RunArgs),
    /// Detect finite-time extinction of path 0.
    Extinction(RunArgs),
    /// Compare a linear ensemble with the closed-form Gaussian law.
    OuOracle(RunArgs),
    /// Compare ensembles from two starts.
    Ergodicity(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the config and SPME_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl Command {
    pub fn split(&self) -> (Subcommand, &RunArgs) {
        match self {
            Command::Simulate(a) => (Subcommand::Simulate, a),
            Command::CheckConditions(a) => (Subcommand::CheckConditions, a),
            Command::ItoCheck(a) => (Subcommand::ItoCheck, a),
            Command::Contraction(a) => (Subcommand::Contraction, a),
            Command::Energy(a) => (Subcommand::Energy, a),
            Command::Extinction(a) => (Subcommand::Extinction, a),
            Command::OuOracle(a) => (Subcommand::OuOracle, a),
            Command::Ergodicity(a) => (Subcommand::Ergodicity, a),
        }
    }
}

/// `--seed`, then `run.master_seed`, then `SPME_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| ConfigError::new("SPME_SEED", format!("`{v}` is not a u64"))),
        None => Ok(0),
    }
}

/// A finished run: the verdict and the manifest that was written.
#[derive(Debug, Clone)]
pub struct Report {
    pub outcome: Outcome,
    pub manifest: Manifest,
}

/// Reads the config, runs the subcommand and writes every output plus
/// `manifest.json` into `args.out`.
pub fn execute(sub: Subcommand, args: &RunArgs) -> Result<Report, RunError> {
    let bytes = std::fs::read(&args.config)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", args.config.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| ConfigError::new("<file>", "config is not UTF-8"))?;
    let cfg = ExperimentConfig::from_json(text)?;
    let env = std::env::var("SPME_SEED").ok();
    let seed = resolve_seed(args.seed, cfg.run.master_seed, env.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| RunError::Setup(format!("thread pool: {e}")))?;
    // fields are not Sync, so the experiment is built on the pool
    let outcome = pool.install(|| {
        let exp = cfg.build(seed)?;
        experiments::run(sub, &cfg, &exp)
    })?;

    std::fs::create_dir_all(&args.out).map_err(|e| RunError::io(format!("creating {}", args.out.display()), e))?;
    let mut outputs = Vec::new();
    for (name, table) in &outcome.tables {
        let data = table.to_bytes();
        write(&args.out.join(name), &data)?;
        outputs.push(OutputEntry { file: name.clone(), sha256: sha256_hex(&data) });
    }
    let manifest = Manifest {
        subcommand: sub.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&bytes),
        master_seed: seed,
        status: if outcome.pass { "PASS" } else { "FAIL" }.to_string(),
        summary: outcome.summary.clone(),
        outputs,
    };
    manifest.write(&args.out.join("manifest.json"))?;
    Ok(Report { outcome, manifest })
}

fn write(path: &Path, data: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, data).map_err(|e| RunError::io(format!("writing {}", path.display()), e))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = cli.command.split();
    match execute(sub, args) {
        Ok(r) => {
            let status = if r.outcome.pass { "PASS" } else { "FAIL" };
            println!("{status} {}: {}", sub.name(), r.outcome.summary);
            ExitCode::from(u8::from(!r.outcome.pass))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
