//! Command-line front end: `icdd <command> --config run.toml --out dir`.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::Artifacts;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "icdd", version, about = "Overlapping Stokes-Darcy coupling and pore-scale validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Periodic cell problem: porosity and permeability.
    Cell,
    /// Coupled Stokes-Darcy solve.
    Icdd,
    /// Pore-resolved reference solve.
    Dns,
    /// Errors and convergence slopes against the reference.
    Validate,
    /// Errors over a list of overlap depths.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Cell => "cell",
            Command::Icdd => "icdd",
            Command::Dns => "dns",
            Command::Validate => "validate",
            Command::Sweep => "sweep",
        }
    }
}

fn write_outputs(dir: &Path, command: Command, config_text: &str, a: &Artifacts) -> Result<()> {
    let manifest = json!({
        "command": command.name(),
        "config_sha256": format!("{:x}", Sha256::digest(config_text.as_bytes())),
        "versions": { "icdd": icdd::VERSION, "icdd-cli": env!("CARGO_PKG_VERSION") },
        "iterations": a.iterations,
        "files": a.files.iter().map(|f| &f.0).collect::<Vec<_>>(),
        "summary": a.summary,
    });
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in &a.files {
        fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<PathBuf> {
    let Some(path) = &cli.config else { bail!("--config <path> is required") };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    let Some(out) = cli.out.clone().or_else(|| cfg.out.clone()) else {
        bail!("no output directory: pass --out or set output.dir")
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let artifacts = match cli.command {
        Command::Cell => commands::cell(&cfg),
        Command::Icdd => commands::icdd(&cfg),
        Command::Dns => commands::dns(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
    }?;
    write_outputs(&out, cli.command, &text, &artifacts)?;
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
