use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heterosync_cli::experiments::run_config;
use heterosync_cli::presets::{preset, PRESET_NAMES};
use heterosync_cli::verify::verify;
use heterosync_cli::{CliError, ExperimentConfig};
use heterosync_core::par;

#[derive(Parser)]
#[command(name = "heterosync", version, about = "Heterogeneous neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key=value config file.
    Run { config: PathBuf },
    /// Run a built-in preset, writing its config and results to DIR.
    Preset {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Only write the preset's config file.
        #[arg(long)]
        config_only: bool,
    },
    /// Run a preset's assertions and print a pass/fail table.
    Verify { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    par::init_from_env();
    let code = match cli.command {
        Command::Run { config } => report(run(&config)),
        Command::Preset { name, out, config_only } => report(run_preset(&name, &out, config_only)),
        Command::Verify { name } => match verify(&name) {
            None => report(Err(unknown_preset(&name))),
            Some(r) => {
                println!("verify {}", r.preset);
                for a in &r.assertions {
                    println!("{a}");
                }
                if r.passed() {
                    0
                } else {
                    2
                }
            }
        },
    };
    ExitCode::from(code as u8)
}

fn report(result: Result<Vec<PathBuf>, CliError>) -> i32 {
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("heterosync: {e}");
            e.exit_code()
        }
    }
}

fn unknown_preset(name: &str) -> CliError {
    CliError::Config(format!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", ")))
}

fn run(path: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    run_config(&ExperimentConfig::parse(&text)?)
}

fn run_preset(name: &str, dir: &PathBuf, config_only: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = preset(name).ok_or_else(|| unknown_preset(name))?;
    cfg.output = dir.join(&cfg.output);
    std::fs::create_dir_all(dir)?;
    let conf = dir.join(format!("{name}.conf"));
    std::fs::write(&conf, cfg.echo())?;
    let mut written = vec![conf];
    if !config_only {
        written.extend(run_config(&cfg)?);
    }
    Ok(written)
}
