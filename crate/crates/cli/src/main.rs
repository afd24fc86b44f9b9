use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sensorprint_cli::experiment::{analyze, extract_fingerprints, resolve_seed, simulate_devices};
use sensorprint_cli::{emit_report, CliError, Dataset, Experiment, ExperimentConfig, ExperimentResult, Format, Result};

/// Sensor fingerprinting experiments on simulated device populations.
#[derive(Parser)]
#[command(name = "sensorprint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a device population and write it as a dataset.
    Simulate(Pipeline),
    /// Add audio fingerprints (sweep or stealth) to a dataset.
    AudioFp(Pipeline),
    /// Add accelerometer fingerprints (Z-axis submissions or six-parameter) to a dataset.
    AccelFp(Pipeline),
    /// Run an audio or six-parameter classification experiment.
    Classify(Analysis),
    /// Percentiles, grid entropy and recognition rates of Z-axis submissions.
    Entropy(Analysis),
    /// Recognition rate as a function of M_Sz.
    Sweep(Analysis),
    /// Simulate, fingerprint and analyze in one step.
    Run(Analysis),
    /// Render a stored JSON result as text or CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Seed; falls back to the config, then SENSORPRINT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Pipeline {
    #[command(flatten)]
    common: Common,
    /// Existing dataset to extend; a fresh population is simulated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct Analysis {
    #[command(flatten)]
    common: Common,
    /// Dataset holding the fingerprints; generated from the config when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also write the generated dataset here.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    /// Result file written with `--format json`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            }),
    }
}

fn require(cfg: &ExperimentConfig, ok: bool, command: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(vec![format!(
            "experiment kind {:?} cannot be used with `{command}`",
            cfg.experiment.name()
        )]))
    }
}

fn base_dataset(cfg: &ExperimentConfig, seed: u64, input: Option<&Path>) -> Result<Dataset> {
    match input {
        Some(path) => Dataset::load(path),
        None => simulate_devices(cfg, seed),
    }
}

fn fingerprint(p: &Pipeline, command: &str, accept: fn(&Experiment) -> bool) -> Result<()> {
    let cfg = ExperimentConfig::load(&p.common.config)?;
    require(&cfg, accept(&cfg.experiment), command)?;
    let seed = resolve_seed(p.common.seed, &cfg)?;
    let mut ds = base_dataset(&cfg, seed, p.input.as_deref())?;
    extract_fingerprints(&cfg, seed, &mut ds)?;
    emit(p.common.out.as_deref(), &ds.to_jsonl())
}

fn analysis(a: &Analysis, command: &str, accept: fn(&Experiment) -> bool) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.common.config)?;
    require(&cfg, accept(&cfg.experiment), command)?;
    let seed = resolve_seed(a.common.seed, &cfg)?;
    let ds = match &a.input {
        Some(path) => Dataset::load(path)?,
        None => {
            let mut ds = simulate_devices(&cfg, seed)?;
            extract_fingerprints(&cfg, seed, &mut ds)?;
            ds
        }
    };
    if let Some(path) = &a.dataset {
        ds.store(path)?;
    }
    let result = analyze(&cfg, seed, &ds)?;
    emit(a.common.out.as_deref(), &emit_report(&result, a.format))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(p) => {
            let cfg = ExperimentConfig::load(&p.common.config)?;
            let seed = resolve_seed(p.common.seed, &cfg)?;
            let ds = simulate_devices(&cfg, seed)?;
            emit(p.common.out.as_deref(), &ds.to_jsonl())
        }
        Command::AudioFp(p) => fingerprint(&p, "audio-fp", Experiment::is_audio),
        Command::AccelFp(p) => fingerprint(&p, "accel-fp", |e| !e.is_audio()),
        Command::Classify(a) => analysis(&a, "classify", |e| {
            e.is_audio() || matches!(e, Experiment::SixParam(_))
        }),
        Command::Entropy(a) => analysis(&a, "entropy", |e| matches!(e, Experiment::AccelEntropy(_))),
        Command::Sweep(a) => analysis(&a, "sweep", |e| matches!(e, Experiment::AccelSweep(_))),
        Command::Run(a) => analysis(&a, "run", |_| true),
        Command::Report(r) => {
            let text = std::fs::read_to_string(&r.input).map_err(|e| CliError::Io {
                path: r.input.clone(),
                source: e,
            })?;
            let result: ExperimentResult = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(vec![format!("{}: {e}", r.input.display())]))?;
            emit(r.out.as_deref(), &emit_report(&result, r.format))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are validation errors; help and version are not errors.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
