//! `indiff`: runs a scenario config and writes long-format results plus a
//! run manifest.

mod config;
mod report;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{Format, ScenarioConfig};

/// Exit status for configuration and schema errors.
const EXIT_CONFIG: u8 = 2;
/// Exit status for model, numerical and I/O failures.
const EXIT_RUN: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "indiff", version, about = "Indifference-pricing scenario runner")]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for Monte Carlo models; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; overrides the config. Standard output when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; overrides the config.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("invalid configuration {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{}: {0}", .0.name())]
    Model(#[from] indiff::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Model(_) | CliError::Io { .. } => EXIT_RUN,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(io_err(&args.config))?;
    let cfg = ScenarioConfig::parse(&text).map_err(|msg| CliError::Config {
        path: args.config.display().to_string(),
        msg,
    })?;
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config {
                path: "--threads".into(),
                msg: e.to_string(),
            })?;
    }
    let seed = args.seed.or(cfg.seed);
    let format = args.format.or(cfg.output.format).unwrap_or_default();
    let out = args.out.clone().or_else(|| cfg.output.path.clone());

    let start = Instant::now();
    let rows = tasks::run(&cfg, seed)?;
    let wall = start.elapsed().as_secs_f64();

    match &out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            report::write_rows(file, format, &cfg.scenario_id, &rows).map_err(io_err(path))?;
            let manifest = json!({
                "scenario_id": cfg.scenario_id,
                "task": cfg.task.as_str(),
                "family": cfg.model.family(),
                "config_sha256": format!("{:x}", Sha256::digest(text.as_bytes())),
                "seed": seed,
                "format": match format { Format::Csv => "csv", Format::Jsonl => "jsonl" },
                "rows": rows.len(),
                "indiff_version": env!("CARGO_PKG_VERSION"),
                "wall_time_s": wall,
            });
            let mpath = manifest_path(path);
            let body = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
            fs::write(&mpath, body + "\n").map_err(io_err(&mpath))?;
        }
        None => {
            let stdout = std::io::stdout();
            report::write_rows(stdout.lock(), format, &cfg.scenario_id, &rows)
                .map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
