//! Simulation loop, experiment suites and trace/summary artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    AlphaSetting, ContextMode, ExperimentConfig, PolicySpec, ProblemShape, SourceSpec,
};
use crate::data_pipeline::{draw_features, generate_synthetic, BanditInstance};
use crate::env::{expected_reward, ArmContext, Environment, ModelParams};
use crate::error::{Error, Result};
use crate::history::DecisionRecord;
use crate::policies::Policy;
use crate::rng::stream;

pub const TRACE_HEADER: &str = "policy,seed,round,instant_regret,cumulative_regret";

/// `max_a θᵀx_a − θᵀx_chosen` over the offered set, using true expected rewards only.
pub fn instantaneous_regret(
    params: &ModelParams,
    offered: &[ArmContext],
    chosen: usize,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    let mut picked = None;
    for arm in offered {
        let r = expected_reward(&params.theta, arm)?;
        best = best.max(r);
        if arm.arm_id == chosen {
            picked = Some(r);
        }
    }
    let picked = picked
        .ok_or_else(|| Error::ContractViolation(format!("chosen arm {chosen} was not offered")))?;
    Ok(best - picked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: String,
    pub seed: u64,
    pub instant: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative regret after `round` rounds (1-based).
    pub fn at(&self, round: usize) -> f64 {
        if round == 0 {
            0.0
        } else {
            self.cumulative[round - 1]
        }
    }
}

/// Randomness for one run. Streams are keyed by label so that every policy at a
/// given seed sees the same instance, noise and context sequence.
pub struct RunStreams {
    pub noise: crate::rng::SimRng,
    pub contexts: crate::rng::SimRng,
    pub policy: crate::rng::SimRng,
}

impl RunStreams {
    pub fn new(seed: u64, policy_label: &str) -> Self {
        Self {
            noise: stream(seed, "noise"),
            contexts: stream(seed, "contexts"),
            policy: stream(seed, &format!("policy/{policy_label}")),
        }
    }
}

/// Runs `policy` for `horizon` rounds against `env`.
pub fn simulate(
    mut env: Environment,
    policy: &mut dyn Policy,
    horizon: usize,
    contexts: ContextMode,
    seed: u64,
    streams: &mut RunStreams,
) -> Result<RegretTrace> {
    let dim = env.params().dim();
    let n_arms = env.arms().len();
    let mut instant = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for round in 1..=horizon {
        if contexts == ContextMode::Resample {
            env.set_features(draw_features(dim, n_arms, &mut streams.contexts))?;
        }
        let offered = env.arms().to_vec();
        let chosen = policy.select(&offered, &mut streams.policy as &mut dyn RngCore)?;
        let regret = instantaneous_regret(env.params(), &offered, chosen)?;
        let feedback = env.pull(chosen, round, &mut streams.noise)?;
        let arm = &offered[chosen];
        policy.observe(&DecisionRecord {
            round,
            arm_id: chosen,
            historical_rating: arm.historical_rating,
            features: arm.features.clone(),
            feedback_value: feedback.value,
        })?;
        total += regret;
        instant.push(regret);
        cumulative.push(total);
    }
    Ok(RegretTrace {
        policy: policy.name().to_string(),
        seed,
        instant,
        cumulative,
    })
}

/// A validated configuration together with any instance file it references.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    fixed_instance: Option<BanditInstance>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let fixed_instance = match &config.source {
            SourceSpec::Synthetic => None,
            SourceSpec::Instance { path } => {
                let inst = BanditInstance::read(path)?;
                if inst.dim() != config.dimension {
                    return Err(Error::config(
                        "dimension",
                        format!("instance {} has dimension {}", path.display(), inst.dim()),
                    ));
                }
                if inst.arms.len() != config.n_arms {
                    return Err(Error::config(
                        "n_arms",
                        format!("instance {} has {} arms", path.display(), inst.arms.len()),
                    ));
                }
                Some(inst)
            }
        };
        Ok(Self {
            config,
            fixed_instance,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn noise_variance(&self) -> f64 {
        self.config
            .noise_variance
            .or(self.fixed_instance.as_ref().map(|i| i.noise_variance))
            .unwrap_or(1.0)
    }

    pub fn shape(&self) -> ProblemShape {
        ProblemShape {
            dimension: self.config.dimension,
            n_arms: self.config.n_arms,
            horizon: self.config.horizon,
            noise_variance: self.noise_variance(),
        }
    }

    /// The bandit instance used by every policy at `seed`.
    pub fn instance(&self, seed: u64) -> Result<BanditInstance> {
        let s2 = self.noise_variance();
        let mut inst = match &self.fixed_instance {
            Some(inst) => {
                let mut inst = inst.clone();
                inst.params = ModelParams::with_shared_noise(
                    inst.params.theta,
                    inst.params.alpha,
                    s2,
                    inst.arms.len(),
                )?;
                inst.noise_variance = s2;
                inst
            }
            None => {
                let mut rng = stream(seed, "instance");
                let (params, arms) =
                    generate_synthetic(self.config.dimension, self.config.n_arms, s2, &mut rng)?;
                BanditInstance::synthetic(params, arms, s2)
            }
        };
        if let AlphaSetting::Fixed(alpha) = self.config.alpha {
            inst.params.alpha = alpha;
        }
        Ok(inst)
    }

    pub fn environment(&self, seed: u64) -> Result<Environment> {
        let inst = self.instance(seed)?;
        Environment::new(inst.params, inst.arms, self.config.history_policy)
    }

    pub fn run_single(&self, spec: &PolicySpec, seed: u64) -> Result<RegretTrace> {
        let run = || {
            let mut policy = spec.build(&self.shape())?;
            self.run_policy(policy.as_mut(), seed)
        };
        run().map_err(|e| Error::Run {
            policy: spec.label(),
            seed,
            source: Box::new(e),
        })
    }

    /// Runs an arbitrary policy on the instance and streams of `seed`.
    pub fn run_policy(&self, policy: &mut dyn Policy, seed: u64) -> Result<RegretTrace> {
        let env = self.environment(seed)?;
        let mut streams = RunStreams::new(seed, policy.name());
        simulate(
            env,
            policy,
            self.config.horizon,
            self.config.contexts,
            seed,
            &mut streams,
        )
    }

    /// Every (policy, seed) pair, policy-major. `jobs = None` uses all cores.
    pub fn run_suite(&self, jobs: Option<usize>) -> Result<SuiteResult> {
        let tasks: Vec<(&PolicySpec, u64)> = self
            .config
            .policies
            .iter()
            .flat_map(|p| self.config.seeds().into_iter().map(move |s| (p, s)))
            .collect();
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            if j == 0 {
                return Err(Error::config("jobs", "must be at least 1"));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::ContractViolation(format!("thread pool: {e}")))?;
        let results: Vec<Result<RegretTrace>> = pool.install(|| {
            tasks
                .par_iter()
                .map(|(p, s)| self.run_single(p, *s))
                .collect()
        });
        let mut traces = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(t) => traces.push(t),
                Err(e) => failures.push(e),
            }
        }
        Ok(SuiteResult { traces, failures })
    }
}

#[derive(Debug)]
pub struct SuiteResult {
    pub traces: Vec<RegretTrace>,
    pub failures: Vec<Error>,
}

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    // Exponent after rounding, so 9.99… can move up a decade.
    let (mantissa, e) = s.split_once('e').expect("exponent form");
    let e: i32 = e.parse().expect("exponent");
    if e < -5 || e >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (digits as i32 - 1 - e).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn as_written(x: f64) -> f64 {
    format_sig(x, 10).parse().expect("formatted float parses")
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn traces_to_csv(traces: &[RegretTrace]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        for (i, (r, c)) in t.instant.iter().zip(&t.cumulative).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t.policy,
                t.seed,
                i + 1,
                format_sig(*r, 10),
                format_sig(*c, 10)
            );
        }
    }
    out
}

pub fn write_traces(path: &Path, traces: &[RegretTrace]) -> Result<()> {
    std::fs::write(path, traces_to_csv(traces)).map_err(|e| Error::io(path, e))
}

/// Reads a trace CSV back; rows must be grouped by (policy, seed) with consecutive rounds.
pub fn read_traces(path: &Path) -> Result<Vec<RegretTrace>> {
    let parse_err = |line: usize, detail: String| Error::Parse {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| parse_err(1, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(parse_err(1, format!("expected header `{TRACE_HEADER}`")));
    }
    let mut traces: Vec<RegretTrace> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let seed: u64 = field(1)
            .parse()
            .map_err(|_| parse_err(line, "bad seed".into()))?;
        let round: usize = field(2)
            .parse()
            .map_err(|_| parse_err(line, "bad round".into()))?;
        let inst: f64 = field(3)
            .parse()
            .map_err(|_| parse_err(line, "bad instant_regret".into()))?;
        let cum: f64 = field(4)
            .parse()
            .map_err(|_| parse_err(line, "bad cumulative_regret".into()))?;
        let fresh = traces
            .last()
            .is_none_or(|t| t.policy != field(0) || t.seed != seed);
        if fresh {
            traces.push(RegretTrace {
                policy: field(0).to_string(),
                seed,
                instant: Vec::new(),
                cumulative: Vec::new(),
            });
        }
        let t = traces.last_mut().expect("just pushed");
        if round != t.instant.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected round {}, found {round}", t.instant.len() + 1),
            ));
        }
        t.instant.push(inst);
        t.cumulative.push(cum);
    }
    Ok(traces)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub n_runs: usize,
    pub horizon: usize,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub min_final_regret: f64,
    pub max_final_regret: f64,
    pub final_regret_by_seed: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub policies: BTreeMap<String, PolicySummary>,
    #[serde(default)]
    pub failures: Vec<String>,
}

impl Summary {
    pub fn from_traces(name: Option<String>, traces: &[RegretTrace], failures: &[Error]) -> Self {
        let mut grouped: BTreeMap<String, Vec<&RegretTrace>> = BTreeMap::new();
        for t in traces {
            grouped.entry(t.policy.clone()).or_default().push(t);
        }
        let policies = grouped
            .into_iter()
            .map(|(name, ts)| {
                // Work from the values as written to CSV so a summary rebuilt
                // from trace files is identical.
                let finals: Vec<f64> = ts.iter().map(|t| as_written(t.final_regret())).collect();
                let n = finals.len() as f64;
                let mean = finals.iter().sum::<f64>() / n;
                let var = if finals.len() > 1 {
                    finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let summary = PolicySummary {
                    n_runs: ts.len(),
                    horizon: ts.iter().map(|t| t.cumulative.len()).max().unwrap_or(0),
                    mean_final_regret: mean,
                    std_final_regret: var.sqrt(),
                    min_final_regret: finals.iter().copied().fold(f64::INFINITY, f64::min),
                    max_final_regret: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    final_regret_by_seed: ts
                        .iter()
                        .map(|t| t.seed)
                        .zip(finals.iter().copied())
                        .collect(),
                };
                (name, summary)
            })
            .collect();
        Self {
            name,
            policies,
            failures: failures.iter().map(|e| e.to_string()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Plain-text table of mean ± std final regret per policy.
    pub fn table(&self) -> String {
        let width = self
            .policies
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!(
            "{:<width$}  {:>5}  {:>14}  {:>12}\n",
            "policy", "runs", "mean regret", "std"
        );
        for (name, p) in &self.policies {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>14.3}  {:>12.3}",
                name, p.n_runs, p.mean_final_regret, p.std_final_regret
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_examples() {
        let params = ModelParams::with_shared_noise(vec![1.0, 0.0], 0.5, 1.0, 2).unwrap();
        let arms = vec![
            ArmContext::new(0, vec![1.0, 0.0], 0.0),
            ArmContext::new(1, vec![0.0, 1.0], 5.0),
        ];
        assert_eq!(instantaneous_regret(&params, &arms, 0).unwrap(), 0.0);
        assert_eq!(instantaneous_regret(&params, &arms, 1).unwrap(), 1.0);
        assert!(instantaneous_regret(&params, &arms, 7).is_err());
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0, 10), "0");
        assert_eq!(format_sig(1.5, 10), "1.5");
        assert_eq!(format_sig(123456.789012345, 10), "123456.789");
        assert_eq!(format_sig(1.0 / 3.0, 10), "0.3333333333");
        assert_eq!(format_sig(2.5e-7, 10), "2.5e-07");
        assert_eq!(format_sig(12345678901.0, 10), "1.23456789e+10");
        assert_eq!(format_sig(9.9999999999, 10), "10");
        assert_eq!(format_sig(-0.25, 10), "-0.25");
    }

    #[test]
    fn csv_round_trip() {
        let t = RegretTrace {
            policy: "ts".into(),
            seed: 3,
            instant: vec![0.5, 0.0, 0.25],
            cumulative: vec![0.5, 0.5, 0.75],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_traces(&path, std::slice::from_ref(&t)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text
            .starts_with("policy,seed,round,instant_regret,cumulative_regret\nts,3,1,0.5,0.5\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_traces(&path).unwrap(), vec![t]);
    }
}
