//! `collapse-lab <phase-sweep|simulate|hutter|proxy> --config <file> --out <csv>`

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use collapse_lab::experiments::{self, Config, ExperimentKind};
use collapse_lab::Execution;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    PhaseSweep,
    Simulate,
    Hutter,
    Proxy,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::PhaseSweep => ExperimentKind::PhaseSweep,
            Command::Simulate => ExperimentKind::SimulationScaling,
            Command::Hutter => ExperimentKind::HutterScaling,
            Command::Proxy => ExperimentKind::ProxyEval,
        }
    }
}

/// Run a sweep described by a key = value config file and write the results as CSV.
#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Base seed, overriding any `seed` key in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut config = Config::read(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.set("seed", seed.to_string());
    }
    // Relative input paths are resolved against the config file's directory.
    if let Some(input) = config.string("input") {
        let path = Path::new(&input);
        if path.is_relative() {
            let dir = cli.config.parent().unwrap_or(Path::new("."));
            config.set("input", dir.join(path).to_string_lossy().into_owned());
        }
    }
    Ok(config)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = load_config(&cli)?;
    let kind = ExperimentKind::from(cli.command);
    let exec = if cli.workers == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let start = Instant::now();
    let table = collapse_lab::exec::with_workers(cli.workers, || experiments::run(kind, &config, exec))??;
    table
        .write(&cli.out)
        .with_context(|| format!("writing {}", cli.out.display()))?;
    log::info!(
        "{}: {} rows written to {} in {:.1}s",
        kind.name(),
        table.rows.len(),
        cli.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
