use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use mmangle_cli::compare::{compare_files, CompareRow};
use mmangle_cli::config::GeneratorSpec;
use mmangle_cli::demo::{tree_demo, DemoConfig};
use mmangle_cli::output::{csv_string, write_csv, write_json, write_run};
use mmangle_cli::source::{generate, write_generated};
use mmangle_cli::sweeps::{sweep_blowup, sweep_harmonic, BlowupSweepConfig, HarmonicSweepConfig};
use mmangle_cli::{run, CliError, ExperimentConfig};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "mmangle", version, about = "Angles on sampled metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an oracle space and write its JSON and oracle descriptor.
    GenSpace {
        /// Generator parameters as inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "space")]
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Error table of a results CSV against an oracle descriptor.
    Compare {
        results: PathBuf,
        oracle: PathBuf,
        /// Writes the table as JSON instead of CSV on stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Representing-function dependence on a three-edge star.
    DemoTree {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harmonic approximation sweep over pole distances and grid spacings.
    SweepHarmonic {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "harmonic.csv")]
        out: PathBuf,
    },
    /// Blow-up stage reports for a collinear sequence and a control.
    SweepBlowup {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "blowup.csv")]
        out: PathBuf,
    },
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn print_json<V: serde::Serialize>(v: &V) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.into()))?);
    Ok(())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::GenSpace { spec, id, seed, out } => {
            let text = if Path::new(&spec).is_file() {
                std::fs::read_to_string(&spec)?
            } else {
                spec
            };
            let spec: GeneratorSpec = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            let o = generate(&spec, seed)?;
            let (s, d) = write_generated(&o, &id, &out)?;
            info!("wrote {} and {}", s.display(), d.display());
        }
        Command::Run { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run(&cfg)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
            write_run(&outcome, &dir, &cfg.output)?;
            info!("{} rows written to {}", outcome.rows.len(), dir.display());
            if !outcome.summary.violations.is_empty() {
                return Err(CliError::Invariant(outcome.summary.violations.join("; ")));
            }
        }
        Command::Compare { results, oracle, json } => {
            let table = compare_files(&results, &oracle)?;
            match json {
                Some(p) => write_json(&p, &table)?,
                None => print!("{}", csv_string::<CompareRow>(&COMPARE_COLUMNS, &table)?),
            }
        }
        Command::DemoTree { config, out } => {
            let cfg: DemoConfig = read_config(config.as_deref())?;
            let report = tree_demo(&cfg)?;
            match out {
                Some(p) => write_json(&p, &report)?,
                None => print_json(&report)?,
            }
        }
        Command::SweepHarmonic { config, out } => {
            let cfg: HarmonicSweepConfig = read_config(config.as_deref())?;
            write_csv(&out, &sweep_harmonic(&cfg)?)?;
        }
        Command::SweepBlowup { config, out } => {
            let cfg: BlowupSweepConfig = read_config(config.as_deref())?;
            let sweep = sweep_blowup(&cfg)?;
            write_csv(&out, &sweep.rows)?;
            write_json(&out.with_extension("json"), &sweep)?;
        }
    }
    Ok(())
}

const COMPARE_COLUMNS: [&str; 9] = [
    "method",
    "rows",
    "compared",
    "median_abs_error",
    "max_abs_error",
    "clamped",
    "max_clamp",
    "nonconverged",
    "errors",
];

fn configure_threads() {
    if let Some(n) = std::env::var("MMANGLE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                error!("cannot cap threads: {e}");
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
