mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Parser};
use fluidloss::{Error, SystemConfig};
use log::{error, info};

use commands::{execute, Command};
use manifest::{describe, now, sha256_hex, GridInfo, RunManifest, VERSION};

#[derive(Parser)]
#[command(name = "fluidloss", version = VERSION, about = "Fluid models, simulation and capacity planning for time-varying loss queues")]
struct Cli {
    /// Worker threads for replications and candidate evaluations [default: all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

enum Failure {
    Core(Error),
    Mismatch(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Domain(_) => 2,
        Error::Numerical { .. } => 3,
        Error::Infeasible(_) | Error::Bracket(_) => 4,
        Error::Io(_) | Error::Json(_) => 5,
    }
}

/// Executes `cmd` and records a manifest next to its outputs.
fn run_recorded(
    cmd: &Command,
    cfg: &SystemConfig,
    config_path: &Path,
    config_sha256: String,
    workers: usize,
) -> Result<RunManifest, Error> {
    let start = Instant::now();
    let outcome = execute(cmd, cfg)?;
    let outputs = outcome
        .outputs
        .iter()
        .map(|p| describe(p))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        tool: "fluidloss".into(),
        version: VERSION.into(),
        command: cmd.clone(),
        config_path: config_path.to_path_buf(),
        config_sha256,
        config: cfg.to_toml_string(),
        grid: GridInfo::from(&outcome.grid),
        seeds: outcome.seeds,
        workers,
        outputs,
        timestamp: now(),
        runtime_secs: start.elapsed().as_secs_f64(),
    };
    let path = cmd.manifest_path().expect("data command");
    manifest.write(&path)?;
    for o in &manifest.outputs {
        info!("wrote {} ({} bytes)", o.path.display(), o.bytes);
    }
    Ok(manifest)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let workers = cli.workers.unwrap_or_else(rayon::current_num_threads);
    match cli.command {
        Command::Rerun(args) => {
            let recorded = RunManifest::read(&args.manifest)?;
            let cfg = SystemConfig::from_toml_str(&recorded.config)?;
            let mut cmd = recorded.command.clone();
            if let Some(dir) = &args.out_dir {
                cmd.relocate(dir);
            }
            let fresh = run_recorded(
                &cmd,
                &cfg,
                &recorded.config_path,
                recorded.config_sha256.clone(),
                workers,
            )?;
            let mut mismatches = 0;
            for (old, new) in recorded.outputs.iter().zip(&fresh.outputs) {
                let same = old.sha256 == new.sha256;
                println!(
                    "{} {}",
                    if same { "match" } else { "MISMATCH" },
                    new.path.display()
                );
                mismatches += usize::from(!same);
            }
            if recorded.outputs.len() != fresh.outputs.len() {
                println!(
                    "MISMATCH output count {} vs {}",
                    recorded.outputs.len(),
                    fresh.outputs.len()
                );
                mismatches += 1;
            }
            if mismatches > 0 {
                return Err(Failure::Mismatch(mismatches));
            }
            Ok(())
        }
        cmd => {
            let path = cmd.config_path().expect("data command").to_path_buf();
            let bytes = std::fs::read(&path).map_err(Error::from)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|e| Error::Config(format!("{} is not UTF-8: {e}", path.display())))?;
            let cfg = SystemConfig::from_toml_str(&text)?;
            let manifest = run_recorded(&cmd, &cfg, &path, sha256_hex(&bytes), workers)?;
            info!("done in {:.2} s", manifest.runtime_secs);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
        {
            error!("cannot set worker count: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Mismatch(n)) => {
            eprintln!("error: {n} output(s) differ from the manifest");
            ExitCode::from(1)
        }
    }
}
