//! Experiment runner for the selftune toolkit.
//!
//! ```text
//! selftune --preset partition --samples 10000 --seed 1 --out runs/partition
//! selftune --preset simple-example --dwell 25 --seeds 20 --out runs/switching
//! selftune --preset lqr50 --seed 7 --seeds 10 --out runs/lqr50
//! selftune --config runs/lqr50/manifest.json        # reproduce a run
//! ```

mod config;
mod runner;

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;

use config::{load_config, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(
    name = "selftune",
    version,
    about = "Closed-loop experiments with self-tuning actuator architectures"
)]
struct Args {
    /// Preset to run: partition, simple-example, lqr50, or custom.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// JSON experiment config (or a manifest from a previous run).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Base seed (first rollout seed / instance seed / sampling seed).
    #[arg(long)]
    seed: Option<u64>,

    /// Number of seeds or instances.
    #[arg(long)]
    seeds: Option<usize>,

    /// Sample count for the partition preset.
    #[arg(long)]
    samples: Option<usize>,

    /// Dwell length for the switching example.
    #[arg(long)]
    dwell: Option<usize>,

    /// Output directory (default: $SELFTUNE_OUT_DIR or ./selftune-out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Rayon thread-pool size (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(args: &Args) -> anyhow::Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(preset)) => ExperimentConfig::for_preset(preset),
        (None, None) => anyhow::bail!("either --preset or --config is required (see --help)"),
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.seeds.is_some() {
        config.seeds = args.seeds;
    }
    if args.samples.is_some() {
        config.samples = args.samples;
    }
    if args.dwell.is_some() {
        config.dwell = args.dwell;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.display().to_string());
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    config.apply_preset_defaults();
    config.validate()?;
    Ok(config)
}

fn main() {
    let args = Args::parse();
    if let Err(err) = try_main(&args) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn try_main(args: &Args) -> anyhow::Result<()> {
    let config = resolve(args)?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out_dir = runner::resolve_out_dir(args.out.as_deref(), &config);
    let output = runner::run(&config, &out_dir)?;
    for artifact in &output.artifacts {
        println!("wrote {}", out_dir.join(artifact).display());
    }
    Ok(())
}
