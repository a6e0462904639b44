//! `resolvent`: config-driven experiment runner.
//!
//! Exit status: 0 when every declared tolerance holds, 2 when a tolerance
//! fails, 1 on invalid configuration or a numerical error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::error::CliError;
use crate::output::{sha256_hex, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "resolvent", version, about = "Resolvent and dispersive-decay experiments")]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-λ solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

enum Outcome {
    Pass,
    ToleranceFail,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&args) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::ToleranceFail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(args: &Args) -> Result<Outcome, CliError> {
    let loaded = config::load(&args.config)?;
    let cfg = &loaded.config;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config { line: None, message: "--threads must be ≥ 1".into() });
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Io(e.to_string()))?;
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let out_dir = args.out.clone().or_else(|| cfg.output.as_ref().map(|p| loaded.base_dir.join(p))).unwrap_or_else(|| "out".into());

    let mut hashed = loaded.source.clone().into_bytes();
    if let Some(path) = cfg.potential.as_ref().and_then(|p| p.path.as_ref()) {
        let table = loaded.base_dir.join(path);
        hashed.extend(std::fs::read(&table).map_err(|e| CliError::Io(format!("{}: {e}", table.display())))?);
    }
    let input_hash = sha256_hex(&hashed);

    let mut out = OutputDir::create(&out_dir)?;
    let ctx = run::Context { config: cfg, base_dir: &loaded.base_dir, seed };
    log::info!("running '{}' into {}", cfg.command.as_str(), out_dir.display());
    let summary = run::run(&ctx, &mut out)?;
    let json = summary.to_json(cfg.command.as_str());
    out.json("summary.json", &json)?;
    let resolved = serde_json::to_value(cfg)?;
    out.manifest(cfg.command.as_str(), &resolved, &input_hash, seed)?;

    if !args.quiet {
        if let Some(v) = summary.metrics.get("verdict") {
            println!("{v}");
        }
        for c in &summary.checks {
            println!("{:<5} {:<36} {:>14.6e}  {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.target);
        }
    }
    Ok(if summary.pass() { Outcome::Pass } else { Outcome::ToleranceFail })
}
