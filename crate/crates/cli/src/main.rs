mod commands;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;

use clap::error::ErrorKind;
use clap::Parser;

use config::{parse_config_file, Cli, RunConfig, THREADS_ENV};
use error::{CliError, CliResult};

fn run() -> CliResult<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.render().to_string())),
    };
    let file = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let cfg = RunConfig::resolve(cli, &file, std::env::var(THREADS_ENV).ok())?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    commands::run(&cfg)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("htm: {}", e.to_string().trim_end());
        std::process::exit(e.exit_code());
    }
}
