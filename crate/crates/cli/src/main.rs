//! Batch driver for the satellite-infrastructure pipeline. Each subcommand
//! runs one stage against a shared config file; stages are re-runnable and
//! communicate only through files under `paths.out`.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "satpipe",
    about = "Satellite-tile infrastructure pipeline: rasterize, train, judge, predict, count, features, benchmark",
    version
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "satpipe.conf")]
    config: PathBuf,

    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for tile-parallel stages (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid the regions and rasterize vector truth into label masks.
    Rasterize,
    /// Train one network per class and ensemble seed.
    Train,
    /// Score validity indices and filter incomplete labels.
    Judge,
    /// Write ensemble-averaged prediction masks.
    Predict,
    /// Threshold sweep, building counts and road skeleton measures.
    Count,
    /// Aggregate per-cell measures into cluster features.
    Features,
    /// Leave-one-country-out model benchmark.
    Benchmark,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;

    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .context("building thread pool")?;

    match cli.command {
        Command::Rasterize => commands::rasterize::run(&cfg),
        Command::Train => commands::train::run(&cfg),
        Command::Judge => commands::judge::run(&cfg),
        Command::Predict => commands::predict::run(&cfg),
        Command::Count => commands::count::run(&cfg),
        Command::Features => commands::features::run(&cfg),
        Command::Benchmark => commands::benchmark::run(&cfg),
    }
}
