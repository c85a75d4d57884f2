use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herdbandit::data_pipeline::{ColumnMap, MfHyper, MIN_RATINGS};
use herdbandit_cli::{
    cmd_fit_mf, cmd_ingest, cmd_run, cmd_simulate, cmd_summarize, load_config, CliError, CliResult,
    ConfigSource, FitMfArgs, SimulateArgs,
};

#[derive(Parser)]
#[command(
    name = "herdbandit",
    version,
    about = "Contextual bandits under herding-biased feedback"
)]
struct Cli {
    /// Suppress the summary table and progress notes.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic instance file.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        dimension: usize,
        #[arg(long, default_value_t = 10)]
        n_arms: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_variance: f64,
        /// Override the sampled conformity.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Filter a ratings CSV to users and items with enough ratings.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = MIN_RATINGS)]
        min_count: usize,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Fit the conformity-aware MF model and export one user's bandit instance.
    FitMf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        dimension: usize,
        #[arg(long, default_value_t = 10)]
        n_arms: usize,
        /// User to export; defaults to the user with the most ratings.
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        noise_variance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        regularization: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Run an experiment suite and write traces and a summary.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long, env = "HERDBANDIT_JOBS")]
        jobs: Option<usize>,
    },
    /// Recompute summary.json from existing trace files.
    Summarize {
        /// Run directory (containing traces/) or a directory of trace CSVs.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value = "user_id")]
    user_col: String,
    #[arg(long, default_value = "item_id")]
    item_col: String,
    #[arg(long, default_value = "rating")]
    rating_col: String,
    /// Timestamp column; pass an empty string if the file has none.
    #[arg(long, default_value = "timestamp")]
    timestamp_col: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Native rating scale, rescaled to [0, 5].
    #[arg(long, default_value_t = 0.0)]
    scale_min: f64,
    #[arg(long, default_value_t = 5.0)]
    scale_max: f64,
}

impl From<ColumnArgs> for ColumnMap {
    fn from(c: ColumnArgs) -> Self {
        ColumnMap {
            user: c.user_col,
            item: c.item_col,
            rating: c.rating_col,
            timestamp: (!c.timestamp_col.is_empty()).then_some(c.timestamp_col),
            delimiter: c.delimiter,
            scale_min: c.scale_min,
            scale_max: c.scale_max,
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate {
            out,
            seed,
            dimension,
            n_arms,
            noise_variance,
            alpha,
        } => {
            let args = SimulateArgs {
                dimension,
                n_arms,
                noise_variance,
                seed,
                alpha,
            };
            let path = cmd_simulate(&args, &out)?;
            if !quiet {
                println!("wrote {}", path.display());
            }
        }
        Command::Ingest {
            input,
            out,
            min_count,
            columns,
        } => {
            let report = cmd_ingest(&input, &columns.into(), min_count, &out)?;
            if !quiet {
                println!(
                    "kept {} of {} ratings ({} users, {} items)",
                    report.ratings, report.raw_ratings, report.users, report.items
                );
            }
        }
        Command::FitMf {
            input,
            out,
            dimension,
            n_arms,
            user,
            noise_variance,
            seed,
            learning_rate,
            regularization,
            epochs,
            columns,
        } => {
            let defaults = MfHyper::default();
            let args = FitMfArgs {
                dimension,
                n_arms,
                user,
                noise_variance,
                seed,
                hyper: MfHyper {
                    learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
                    regularization: regularization.unwrap_or(defaults.regularization),
                    epochs: epochs.unwrap_or(defaults.epochs),
                    ..defaults
                },
            };
            let report = cmd_fit_mf(&input, &columns.into(), &args, &out)?;
            if !quiet {
                println!(
                    "user {}: conformity {:.4}, training mse {:.4}",
                    report.user_id, report.conformity, report.mse
                );
            }
        }
        Command::Run {
            config,
            preset,
            out,
            seed,
            jobs,
        } => {
            let source = match (config, preset) {
                (Some(path), _) => ConfigSource::File(path),
                (None, Some(name)) => ConfigSource::Preset(name),
                (None, None) => {
                    return Err(CliError::Usage(
                        "one of --config or --preset is required".into(),
                    ))
                }
            };
            let cfg = load_config(&source, seed)?;
            let run = cmd_run(cfg, &out, jobs)?;
            if !quiet {
                print!("{}", run.summary.table());
            }
        }
        Command::Summarize { traces, out } => {
            let summary = cmd_summarize(&traces, &out)?;
            if !quiet {
                print!("{}", summary.table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
