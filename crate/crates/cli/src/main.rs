//! Command-line entry point: single runs, grid sweeps and report rebuilds.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cdmad_lab::harness::{emit, report, run_experiment, sweep, GridSpec, RunConfig};

#[derive(Parser)]
#[command(name = "cdmad-lab", version, about = "Class-imbalanced SSL laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single configuration and emit its artifacts.
    Run {
        /// JSON run configuration; `{}` uses all defaults.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics, confusions, traces and charts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the cross product of a base config, grid cells and seeds.
    Sweep {
        /// JSON base configuration merged under every grid cell.
        #[arg(long)]
        config: PathBuf,
        /// JSON grid: {"seeds": [...], "cells": [{...}, ...]}.
        #[arg(long)]
        grid: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute summary.json from a previously emitted metrics.csv.
    Report {
        /// Directory holding metrics.csv.
        #[arg(long = "in")]
        in_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_experiment(&cfg)?;
            emit(&[&result], &out)?;
            let m = &result.final_metrics;
            println!(
                "run {} seed {}: bACC {:.4}  GM {:.4}  BER {:.4}",
                result.config_id, result.seed, m.bacc, m.gm, m.ber
            );
            println!("artifacts written to {}", out.display());
        }
        Command::Sweep { config, grid, out } => {
            let base: serde_json::Value = serde_json::from_str(
                &fs::read_to_string(&config)
                    .with_context(|| format!("reading {}", config.display()))?,
            )
            .with_context(|| format!("parsing {}", config.display()))?;
            let spec: GridSpec = serde_json::from_str(
                &fs::read_to_string(&grid)
                    .with_context(|| format!("reading {}", grid.display()))?,
            )
            .with_context(|| format!("parsing {}", grid.display()))?;
            let cells = sweep(&base, &spec)?;
            let mut ok = Vec::new();
            let mut failures = 0usize;
            for cell in &cells {
                match &cell.outcome {
                    Ok(r) => ok.push(r),
                    Err(e) => {
                        failures += 1;
                        eprintln!("cell failed (seed {}): {e}", cell.config.seed);
                    }
                }
            }
            emit(&ok, &out)?;
            println!(
                "sweep: {} cells, {} succeeded, {} failed; artifacts in {}",
                cells.len(),
                ok.len(),
                failures,
                out.display()
            );
        }
        Command::Report { in_dir } => {
            let summary = report(&in_dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}
