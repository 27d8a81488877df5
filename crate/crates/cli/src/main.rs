//! `neuroband` — spectral EEG feature extraction and classification.
//!
//! Exit codes: 0 success, 1 config error, 2 I/O error (including partial
//! extraction without `--allow-partial`), 3 all sessions failed, 4 model
//! schema mismatch, 5 split leakage.

use clap::{Parser, Subcommand};
use neuroband::pipeline::{self, PipelineError, RunConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "neuroband", version, about = "EEG band-power feature pipeline")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "neuroband.toml")]
    config: PathBuf,

    /// Cap the worker thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Exit 0 even when some sessions fail extraction.
    #[arg(long, global = true)]
    allow_partial: bool,

    /// Validate config and inputs without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Override the configured seed (flags win over config; the
    /// NEUROBAND_SEED environment variable also overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-session features from the manifest's recordings.
    Extract,
    /// Fit the configured classifier on the train partition.
    Train,
    /// Grid search, then refit the best configuration.
    Gridsearch,
    /// Score the test partition once with the written model.
    Evaluate,
    /// KL diagnostics over exported attention maps.
    Kl {
        /// Directory of attention tensor files (overrides the config).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Write per-band filtered copies of every session.
    Bandsplit,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut config = RunConfig::from_toml_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32, PipelineError> {
    let config = load_config(cli)?;
    if cli.dry_run {
        match &cli.command {
            Command::Kl { .. } => config.validate()?,
            _ => pipeline::run_dry_run(&config)?,
        }
        eprintln!("dry run ok");
        return Ok(0);
    }
    match &cli.command {
        Command::Extract => {
            let summary = pipeline::run_extract(&config, cli.jobs)?;
            for failure in &summary.failures {
                eprintln!("warning: {} failed: {}", failure.path, failure.error);
            }
            eprintln!(
                "extracted {}/{} sessions -> {}",
                summary.extracted,
                summary.attempted,
                config.features_path().display()
            );
            Ok(pipeline::extract_exit_code(&summary, cli.allow_partial))
        }
        Command::Train => {
            let report = pipeline::run_train(&config, cli.jobs)?;
            print!("{}", report.to_text());
            Ok(0)
        }
        Command::Gridsearch => {
            let report = pipeline::run_gridsearch(&config, cli.jobs)?;
            let best = &report.candidates[report.best];
            eprintln!(
                "grid search: {} candidates, best #{} (val macro-F1 {:.4})",
                report.candidates.len(),
                report.best,
                best.val_macro_f1.unwrap_or(f64::NAN)
            );
            Ok(0)
        }
        Command::Evaluate => {
            let report = pipeline::run_evaluate(&config, cli.jobs)?;
            print!("{}", report.to_text());
            Ok(0)
        }
        Command::Kl { dir } => {
            let report = pipeline::run_kl(&config, dir.as_deref(), cli.jobs)?;
            println!(
                "KL(Correct||Incorrect) {:.6e}   KL(Incorrect||Correct) {:.6e}   pairs {}",
                report.kl_correct_vs_incorrect,
                report.kl_incorrect_vs_correct,
                report.pair_count
            );
            Ok(0)
        }
        Command::Bandsplit => {
            let written = pipeline::run_bandsplit(&config, cli.jobs)?;
            eprintln!(
                "wrote {written} band files under {}",
                config.output_dir.join("bands").display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
