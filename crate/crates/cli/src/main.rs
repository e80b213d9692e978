//! `bml`: run one experiment from a JSON config, with command-line
//! overrides for the common knobs.

use std::path::PathBuf;
use std::process::ExitCode;

use bml::harness::{run_experiment, ExperimentConfig, ExperimentKind, FieldError, HarnessError, TableFormat};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bml", version, about = "BML traffic model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve random configurations and record mobility.
    Simulate(Common),
    /// Classify phases over a grid of densities and seeds.
    PhaseScan(Common),
    /// Search random tori for cyclic blocking paths.
    Blocking(Common),
    /// Estimate good-edge probabilities on the renormalized lattice.
    GoodEdge(Common),
    /// Estimate how often a blocking path lands near a target.
    TargetHit(Common),
    /// Estimate oriented-cycle probabilities on skew tori.
    SkewCycle(Common),
    /// Simulate the reflected walk and compare with its exact law.
    Wchain(Common),
    /// Draw a configuration as PPM (and optionally PNG).
    Render(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; its `kind`, if present, must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::PhaseScan(c) => (ExperimentKind::PhaseScan, c),
            Command::Blocking(c) => (ExperimentKind::Blocking, c),
            Command::GoodEdge(c) => (ExperimentKind::GoodEdge, c),
            Command::TargetHit(c) => (ExperimentKind::TargetHit, c),
            Command::SkewCycle(c) => (ExperimentKind::SkewCycle, c),
            Command::Wchain(c) => (ExperimentKind::Wchain, c),
            Command::Render(c) => (ExperimentKind::Render, c),
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config(vec![FieldError::new(field, message)])
}

fn load(kind: ExperimentKind, args: Common) -> Result<ExperimentConfig, HarnessError> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error("--config", format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| config_error("--config", e.to_string()))?
        }
        None => json!({}),
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| config_error("--config", "top level must be a JSON object"))?;
    match obj.get("kind") {
        None => {
            obj.insert("kind".into(), json!(kind));
        }
        Some(k) if *k == json!(kind) => {}
        Some(k) => {
            return Err(config_error("kind", format!("config says {k}, subcommand is {}", kind.name())));
        }
    }
    if let Some(seed) = args.seed {
        // a command-line seed replaces any seed list in the file
        obj.remove("seeds");
        obj.insert("seed".into(), json!(seed));
    }
    if let Some(dir) = args.out_dir {
        obj.insert("out_dir".into(), json!(dir));
    }
    if let Some(t) = args.threads {
        obj.insert("threads".into(), json!(t));
    }
    if let Some(f) = args.format {
        let f = match f {
            Format::Csv => TableFormat::Csv,
            Format::Json => TableFormat::Json,
        };
        obj.insert("format".into(), json!(f));
    }
    let config = ExperimentConfig::from_value(doc)?;
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let result = load(kind, args).and_then(|c| run_experiment(&c));
    match result {
        Ok(record) => {
            let dir = record.config.out_dir();
            println!(
                "{} finished in {:.2}s, {} files in {}",
                kind.name(),
                record.wall_time_secs,
                record.manifest.len(),
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
