// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! `ionzeno run <config> [--out DIR] [--seed N] [--preset NAME] [--override key=value]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical assertion,
//! 4 fit failure.

mod config;
mod error;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ionzeno", version, about = "Scenario runner for the ionzeno simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Built-in parameter set applied beneath the file.
        #[arg(long)]
        preset: Option<String>,
        /// `section.key=value`, applied after the file. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the built-in presets.
    Presets,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets => {
            for p in config::PRESETS {
                println!("{p}");
            }
            Ok(())
        }
        Command::Run {
            config: path,
            out,
            seed,
            preset,
            overrides,
        } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let raw = config::load(&text, &path.display().to_string(), preset.as_deref(), &overrides)?;
            let report = scenario::run(&raw, out.as_deref(), seed)?;
            for line in &report.lines {
                println!("{line}");
            }
            for p in &report.written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
