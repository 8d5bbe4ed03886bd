//! Command-line front end for the loop soup toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod output;
pub mod run;
pub mod suite;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::config::{env_layer, merge, read_config_file, ExperimentConfig, KvMap};
use crate::output::verdict_line;
use crate::run::{run, EXIT_ASSERTION, EXIT_CONFIG};

/// Resolves file, environment and flag layers into one validated config.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, config::ConfigError> {
    let file = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => KvMap::new(),
    };
    let env = env_layer(|name| std::env::var(name).ok());
    ExperimentConfig::from_kv(&merge(&[&file, &env, &cli.to_kv()]))
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(EXIT_ASSERTION as u8);
    }
    match run(&cfg) {
        Ok(outcome) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            for r in &outcome.records {
                println!("{}", verdict_line(r));
            }
            let failures = outcome.records.iter().filter(|r| r.verdict.is_failure()).count();
            for p in &outcome.artifacts {
                eprintln!("wrote {}", p.display());
            }
            if failures > 0 {
                eprintln!("{failures} asserted check(s) failed");
                ExitCode::from(EXIT_ASSERTION as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
