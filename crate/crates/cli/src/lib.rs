//! Command-line workflow for neural INGARCH models: order and hidden-layer
//! selection, fitting, diagnostics, simulation and reports.
//!
//! Every command writes its artifacts and a `manifest.json` into the output
//! directory. The manifest records the full configuration, the seed, the
//! tool version and SHA-256 digests of the inputs; rerunning with the same
//! manifest reproduces every artifact byte for byte.
//!
//! Exit status: 0 success, 2 ingestion error, 3 non-convergence, 4 inference
//! error, 5 usage error.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use args::{Cli, Command};
pub use commands::{diagnose, Artifacts, DiagnoseOptions};
pub use error::{CliError, CliResult, ExitClass};

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'static str,
    config: &'a Command,
    inputs: Vec<InputRecord>,
    outputs: Vec<&'a str>,
}

fn digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::ingestion(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Runs `command`, writing its artifacts and manifest.
pub fn execute(command: &Command) -> CliResult<Artifacts> {
    let artifacts = match command {
        Command::SelectOrder(a) => commands::select_order_cmd(a)?,
        Command::SelectHidden(a) => commands::select_hidden_cmd(a)?,
        Command::Fit(a) => commands::fit_cmd(a)?,
        Command::Diagnose(a) => commands::diagnose_cmd(a)?,
        Command::Simulate(a) => commands::simulate_cmd(a)?,
        Command::Report(a) => commands::report_cmd(a)?,
    };
    let dir = command.out_dir();
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &artifacts.files {
        std::fs::write(dir.join(name), contents)?;
    }
    let manifest = Manifest {
        tool: "ningarch",
        version: env!("CARGO_PKG_VERSION"),
        core_version: ningarch::VERSION,
        command: command.name(),
        config: command,
        inputs: artifacts
            .inputs
            .iter()
            .map(|p| {
                Ok(InputRecord {
                    path: p.display().to_string(),
                    sha256: digest(p)?,
                })
            })
            .collect::<CliResult<_>>()?,
        outputs: artifacts.files.iter().map(|(n, _)| n.as_str()).collect(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(artifacts)
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitClass::Usage.code() } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(artifacts) => {
            print!("{}", artifacts.stdout);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.class.code()
        }
    }
}
