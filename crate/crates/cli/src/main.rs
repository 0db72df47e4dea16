use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ptssh_cli::config::parse_emit_list;
use ptssh_cli::{
    paper_figures, resolve_out_dir, run_batch, run_experiment, BatchConfig, Command, ExperimentConfig, ExperimentError,
    Format, OUT_DIR_ENV,
};
use ptssh_core::exec::{configure_threads, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Action {
    Spectrum,
    EdgeStates,
    BandSweep,
    Quench,
    ScatterSweep,
    /// Run every `[[experiment]]` of a batch config.
    Batch,
    /// Edge states, band sweep, quench pair and both scattering sweeps.
    PaperFigures,
}

impl Action {
    fn command(self) -> Option<Command> {
        match self {
            Action::Spectrum => Some(Command::Spectrum),
            Action::EdgeStates => Some(Command::EdgeStates),
            Action::BandSweep => Some(Command::BandSweep),
            Action::Quench => Some(Command::Quench),
            Action::ScatterSweep => Some(Command::ScatterSweep),
            Action::Batch | Action::PaperFigures => None,
        }
    }
}

/// Spectra, quench dynamics and scattering of an SSH chain with a
/// PT-symmetric gain/loss segment.
#[derive(Debug, Parser)]
#[command(name = "ptssh", version)]
struct Cli {
    #[arg(value_enum)]
    action: Action,
    /// TOML experiment file (optional for paper-figures).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, value_parser = parse_emit_list)]
    emit: Option<BTreeSet<Format>>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn read(path: &PathBuf) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| ExperimentError::Validation(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<i32, ExperimentError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ExperimentError::Validation("--threads must be at least 1".into()));
        }
        if !configure_threads(n) {
            eprintln!("warning: --threads ignored (parallel support not compiled in or pool already set)");
        }
    }
    let env = std::env::var(OUT_DIR_ENV).ok();

    if let Some(command) = cli.action.command() {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| ExperimentError::Validation(format!("{command} needs --config <file>")))?;
        let mut config = ExperimentConfig::from_toml(&read(path)?)?;
        match config.command {
            None => config.command = Some(command),
            Some(c) if c != command => {
                return Err(ExperimentError::Validation(format!(
                    "config describes a {c} experiment, not {command}"
                )))
            }
            Some(_) => {}
        }
        if cli.emit.is_some() {
            config.emit = cli.emit.clone();
        }
        let dir = resolve_out_dir(cli.out.as_deref(), env.as_deref(), config.output_dir.as_deref());
        let report = run_experiment(&config, &dir)?;
        println!("{command}: wrote {} files to {}", report.files.len(), dir.display());
        println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
        return Ok(0);
    }

    let mut batch = match (cli.action, &cli.config) {
        (Action::Batch, None) => return Err(ExperimentError::Validation("batch needs --config <file>".into())),
        (_, Some(path)) => BatchConfig::from_toml(&read(path)?)?,
        (_, None) => paper_figures(),
    };
    if cli.emit.is_some() {
        for e in &mut batch.experiment {
            e.emit = cli.emit.clone();
        }
    }
    let dir = resolve_out_dir(cli.out.as_deref(), env.as_deref(), batch.output_dir.as_deref());
    let report = run_batch(&batch, &dir, Execution::default())?;
    for e in &report.experiments {
        match &e.error {
            None => println!("{}: ok", e.name),
            Some(err) => println!("{}: FAILED ({err})", e.name),
        }
    }
    println!("outputs in {}", dir.display());
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
