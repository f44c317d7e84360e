use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fraudlab_cli::error::CliError;
use fraudlab_cli::screen::{decisions_csv, summary};
use fraudlab_cli::{run_experiment, screen_transactions, ExperimentConfig};
use fraudlab_core::embed::{run_tsne, TsneParams};
use fraudlab_core::synth::{generate, SyntheticSpec};
use fraudlab_core::tabular::{load_csv, save_csv, subsample_keep_positives, DEFAULT_LABEL_COLUMN};

#[derive(Parser)]
#[command(
    name = "fraudlab",
    version,
    about = "Fraud-detection model comparison and transaction screening"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Score transactions with a saved boosted model.
    Screen {
        model: PathBuf,
        csv: PathBuf,
        #[arg(long)]
        threshold: f64,
        /// Decisions CSV; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed a labelled CSV in two dimensions.
    Tsne {
        csv: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Rows kept (all positives first, up to half).
        #[arg(long, default_value_t = 2000)]
        max_points: usize,
        #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
        label_column: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic transaction table.
    Generate {
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 0.01)]
        positive_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.to_csv());
            eprintln!("wrote {}", cfg.output_dir.display());
        }
        Command::Screen {
            model,
            csv,
            threshold,
            out,
        } => {
            let decisions = screen_transactions(&model, &csv, threshold)?;
            if out.is_some() {
                emit(out.as_ref(), &decisions_csv(&decisions))?;
            }
            let (approved, review) = summary(&decisions);
            println!("approved {approved}, forwarded for review {review}");
            if out.is_none() {
                print!("{}", decisions_csv(&decisions));
            }
        }
        Command::Tsne {
            csv,
            perplexity,
            seed,
            iterations,
            max_points,
            label_column,
            out,
        } => {
            let ds = load_csv(&csv, &label_column).map_err(|source| CliError::Stage {
                stage: "load",
                source,
            })?;
            let sample = ds.select(&subsample_keep_positives(&ds, max_points, seed));
            let params = TsneParams {
                perplexity,
                iterations,
                seed,
                ..Default::default()
            };
            let rows: Vec<&[f64]> = sample.rows().collect();
            let emb = run_tsne(&rows, &params).map_err(|source| CliError::Stage {
                stage: "tsne",
                source,
            })?;
            if !emb.affinities_unconverged.is_empty() {
                eprintln!(
                    "{} rows missed the perplexity target",
                    emb.affinities_unconverged.len()
                );
            }
            emit(out.as_ref(), &emb.to_csv(sample.labels()))?;
        }
        Command::Generate {
            out,
            rows,
            positive_fraction,
            seed,
        } => {
            let spec = SyntheticSpec {
                n_rows: rows,
                positive_fraction,
                seed,
                ..Default::default()
            };
            let ds = generate(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
            save_csv(&ds, &out, DEFAULT_LABEL_COLUMN).map_err(|source| CliError::Stage {
                stage: "write",
                source,
            })?;
        }
    }
    Ok(())
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
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
