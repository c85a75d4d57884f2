//! Subcommands of the `herdbandit` binary.
//!
//! Every command is a pure function of its inputs, configuration and seed to
//! the bytes it writes under the output directory.

use std::path::{Path, PathBuf};

use herdbandit::config::{preset, ExperimentConfig, PRESET_NAMES};
use herdbandit::data_pipeline::{
    filter_dataset, fit_mf, generate_synthetic, to_bandit_instance, BanditInstance, ColumnMap,
    FilterReport, MfHyper, RatingsDataset,
};
use herdbandit::harness::{read_traces, write_traces, Experiment, RegretTrace, Summary};
use herdbandit::rng::stream;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, missing or malformed configuration. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that fails after the inputs were accepted. Exit code 1.
    #[error(transparent)]
    Runtime(#[from] herdbandit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(err: herdbandit::Error) -> CliError {
    CliError::Usage(err.to_string())
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        CliError::Runtime(herdbandit::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| {
        CliError::Runtime(herdbandit::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

/// Where an experiment configuration comes from.
#[derive(Debug, Clone)]
pub enum ConfigSource {
    File(PathBuf),
    Preset(String),
}

pub fn load_config(source: &ConfigSource, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut cfg = match source {
        ConfigSource::File(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!(
                    "config file not found: {}",
                    path.display()
                )));
            }
            ExperimentConfig::read(path).map_err(usage)?
        }
        ConfigSource::Preset(name) => preset(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset `{name}`; available: {}",
                PRESET_NAMES.join(", ")
            ))
        })?,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub struct RunOutput {
    pub summary: Summary,
    pub traces: Vec<RegretTrace>,
}

/// Runs every (policy, seed) pair and writes `traces/<policy>.csv`, one file per
/// policy holding all seeds, plus `summary.json`, `config.toml` and the per-seed
/// instances under `instance/`.
pub fn cmd_run(cfg: ExperimentConfig, out: &Path, jobs: Option<usize>) -> CliResult<RunOutput> {
    let experiment = Experiment::new(cfg.clone()).map_err(|e| match e {
        herdbandit::Error::InvalidConfig { .. }
        | herdbandit::Error::Parse { .. }
        | herdbandit::Error::Io { .. } => usage(e),
        other => CliError::Runtime(other),
    })?;
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let traces_dir = out.join("traces");
    let instance_dir = out.join("instance");
    create_dir(&traces_dir)?;
    create_dir(&instance_dir)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()).map_err(|e| herdbandit::Error::Io {
        path: out.join("config.toml"),
        source: e,
    })?;
    for seed in cfg.seeds() {
        experiment
            .instance(seed)?
            .write(&instance_dir.join(format!("seed-{seed}.inst")))?;
    }

    let result = experiment.run_suite(jobs)?;
    for spec in &cfg.policies {
        let label = spec.label();
        let traces: Vec<RegretTrace> = result
            .traces
            .iter()
            .filter(|t| t.policy == label)
            .cloned()
            .collect();
        if !traces.is_empty() {
            write_traces(&traces_dir.join(format!("{label}.csv")), &traces)?;
        }
    }
    let summary = Summary::from_traces(cfg.name.clone(), &result.traces, &result.failures);
    summary.write(&out.join("summary.json"))?;
    if let Some(first) = result.failures.into_iter().next() {
        return Err(CliError::Runtime(first));
    }
    Ok(RunOutput {
        summary,
        traces: result.traces,
    })
}

/// Rebuilds `summary.json` from the trace files in `<dir>/traces` (or `dir` itself).
pub fn cmd_summarize(dir: &Path, out: &Path) -> CliResult<Summary> {
    let traces_dir = if dir.join("traces").is_dir() {
        dir.join("traces")
    } else {
        dir.to_path_buf()
    };
    if !traces_dir.is_dir() {
        return Err(CliError::Usage(format!(
            "trace directory not found: {}",
            traces_dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&traces_dir)
        .map_err(|e| herdbandit::Error::Io {
            path: traces_dir.clone(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no trace CSV files in {}",
            traces_dir.display()
        )));
    }
    let mut traces = Vec::new();
    for f in &files {
        traces.extend(read_traces(f)?);
    }
    let summary = Summary::from_traces(None, &traces, &[]);
    create_dir(out)?;
    summary.write(&out.join("summary.json"))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub dimension: usize,
    pub n_arms: usize,
    pub noise_variance: f64,
    pub seed: u64,
    pub alpha: Option<f64>,
}

/// Writes `instance/synthetic-seed<seed>.inst`. The instance is the one an
/// experiment with the same seed draws.
pub fn cmd_simulate(args: &SimulateArgs, out: &Path) -> CliResult<PathBuf> {
    if let Some(a) = args.alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(CliError::Usage("--alpha must lie in [0, 1]".into()));
        }
    }
    let mut rng = stream(args.seed, "instance");
    let (mut params, arms) =
        generate_synthetic(args.dimension, args.n_arms, args.noise_variance, &mut rng)
            .map_err(usage)?;
    if let Some(a) = args.alpha {
        params.alpha = a;
    }
    let inst = BanditInstance::synthetic(params, arms, args.noise_variance);
    let dir = out.join("instance");
    create_dir(&dir)?;
    let path = dir.join(format!("synthetic-seed{}.inst", args.seed));
    inst.write(&path)?;
    Ok(path)
}

/// Writes `ratings.filtered.csv` and `ingest_report.json`.
pub fn cmd_ingest(
    input: &Path,
    columns: &ColumnMap,
    min_count: usize,
    out: &Path,
) -> CliResult<FilterReport> {
    if !input.is_file() {
        return Err(CliError::Usage(format!(
            "input file not found: {}",
            input.display()
        )));
    }
    let raw = RatingsDataset::read_csv(input, columns)?;
    let filtered = filter_dataset(&raw, min_count)?;
    let report = FilterReport::new(&raw, &filtered, min_count);
    create_dir(out)?;
    filtered.write_csv(&out.join("ratings.filtered.csv"))?;
    write_json(&out.join("ingest_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FitMfArgs {
    pub dimension: usize,
    pub n_arms: usize,
    pub user: Option<String>,
    pub noise_variance: f64,
    pub seed: u64,
    pub hyper: MfHyper,
}

#[derive(Debug, Clone, Serialize)]
pub struct MfReport {
    pub user_id: String,
    pub dimension: usize,
    pub n_arms: usize,
    pub conformity: f64,
    pub beta: f64,
    pub final_loss: f64,
    pub mse: f64,
    pub loss_history: Vec<f64>,
}

/// Fits the conformity-aware MF model on an already filtered ratings file and
/// writes `instance/<user>.inst` and `mf_report.json`. Without `--user` the most
/// active user (ties broken by id) is chosen.
pub fn cmd_fit_mf(
    input: &Path,
    columns: &ColumnMap,
    args: &FitMfArgs,
    out: &Path,
) -> CliResult<MfReport> {
    if !input.is_file() {
        return Err(CliError::Usage(format!(
            "input file not found: {}",
            input.display()
        )));
    }
    args.hyper.validate().map_err(usage)?;
    let data = RatingsDataset::read_csv(input, columns)?;
    let user = match &args.user {
        Some(u) => u.clone(),
        None => data
            .user_counts()
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
            .map(|(u, _)| u.to_string())
            .ok_or(herdbandit::Error::EmptyDataset { min_count: 1 })?,
    };
    let mut rng = stream(args.seed, "mf");
    let model = fit_mf(&data, args.dimension, &args.hyper, &mut rng)?;
    let inst = to_bandit_instance(&model, &user, args.noise_variance, args.n_arms)?;
    let dir = out.join("instance");
    create_dir(&dir)?;
    inst.write(&dir.join(format!("{}.inst", sanitize(&user))))?;
    let report = MfReport {
        user_id: user,
        dimension: args.dimension,
        n_arms: args.n_arms,
        conformity: model.conformity(),
        beta: model.beta,
        final_loss: model.loss_history.last().copied().unwrap_or(f64::NAN),
        mse: model.mse(&data)?,
        loss_history: model.loss_history.clone(),
    };
    write_json(&out.join("mf_report.json"), &report)?;
    Ok(report)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
