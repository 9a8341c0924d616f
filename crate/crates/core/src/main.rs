use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qelm::harness::{self, presets, ExperimentConfig, OutputFormat, RunOptions};
use qelm::Error;

#[derive(Parser)]
#[command(name = "qelm", version, about = "Quantum extreme learning machine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (alternative to the positional argument).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file for `run`, output directory for `figure`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Record wall-clock time per row (results are then not byte-stable).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run { path: Option<PathBuf> },
    /// Check a config file without running it.
    Validate { path: Option<PathBuf> },
    /// Run a built-in preset and write `<out>/<name>.csv`.
    Figure { name: Figure },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig3,
    Fig4,
    Fig6,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(cli: &Cli, positional: &Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let path = positional
        .as_ref()
        .or(cli.config.as_ref())
        .ok_or_else(|| Failure::Config("no config file given".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } | Error::Config { .. } => Failure::Config(e.to_string()),
        other => Failure::from(other),
    })?;
    apply_overrides(cli, &mut cfg);
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.timing {
        cfg.record_timing = true;
    }
}

fn real_main(cli: &Cli) -> Result<(), Failure> {
    let options = RunOptions { jobs: cli.jobs };
    match &cli.command {
        Command::Validate { path } => {
            let cfg = load(cli, path)?;
            println!("ok: {} rows", cfg.row_count());
        }
        Command::Run { path } => {
            let cfg = load(cli, path)?;
            let spec = cfg.output.clone();
            let out = cli
                .out
                .clone()
                .or_else(|| spec.as_ref().map(|o| o.path.clone()))
                .ok_or_else(|| Failure::Config("no output path (use --out or output.path)".into()))?;
            let format = cli
                .format
                .map(OutputFormat::from)
                .or(spec.map(|o| o.format))
                .unwrap_or_default();
            let rows = harness::execute(&cfg, &out, format, options)?;
            let failed = rows.iter().filter(|r| r.is_error()).count();
            eprintln!("wrote {} rows to {} ({failed} with errors)", rows.len(), out.display());
        }
        Command::Figure { name } => {
            let key = match name {
                Figure::Fig3 => "fig3",
                Figure::Fig4 => "fig4",
                Figure::Fig6 => "fig6",
            };
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let mut cfg = presets::by_name(key, presets::DEFAULT_SEED).expect("known preset");
            apply_overrides(cli, &mut cfg);
            let format = cli.format.map(OutputFormat::from).unwrap_or_default();
            let ext = match format {
                OutputFormat::Csv => "csv",
                OutputFormat::Json => "json",
            };
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            let config_path = dir.join(format!("{key}.config.json"));
            std::fs::write(&config_path, cfg.to_json_string() + "\n")
                .map_err(|e| Failure::Runtime(format!("{}: {e}", config_path.display())))?;
            let out = dir.join(format!("{key}.{ext}"));
            let rows = harness::execute(&cfg, &out, format, options)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
