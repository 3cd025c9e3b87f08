//! Experiment harness: run configuration, repeated runs per problem with
//! majority-rule solved status and medians, batch score boards, and
//! competition-style comparison scores.

mod score;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_simulation, run_threaded, EngineConfig, RunStatus, SystemOutcome};
use crate::filter::FilterPolicy;
use crate::io::{parse_task, IoError};
use crate::model::{JointPlan, Problem};
use crate::net::{DelayModel, DelaySampler};

pub use score::{common_averages, ipc_scores, quality_score, time_score, CommonAverages, ConfigScore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Task(#[from] IoError),
    #[error("score comparison needs at least two configurations")]
    TooFewConfigs,
    #[error("compared reports share no problem")]
    DisjointProblems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sim,
    Threads,
}

impl FromStr for Mode {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().as_str() {
            "sim" => Ok(Mode::Sim),
            "threads" | "threaded" => Ok(Mode::Threads),
            _ => Err(HarnessError::Config(format!("unknown mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sim => "sim",
            Mode::Threads => "threads",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub tasks: Vec<PathBuf>,
    pub policy: FilterPolicy,
    pub mode: Mode,
    pub delay_mean_ms: f64,
    pub delay_stdev_ratio: f64,
    /// Virtual seconds in simulation, wall seconds with threads.
    pub time_limit_s: f64,
    pub runs: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            label: "default".into(),
            tasks: Vec::new(),
            policy: FilterPolicy::default(),
            mode: Mode::Sim,
            delay_mean_ms: 0.0,
            delay_stdev_ratio: 0.10,
            time_limit_s: 300.0,
            runs: 5,
            seed: 0,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs.is_multiple_of(2) {
            return Err(HarnessError::Config(format!("runs per problem must be odd, got {}", self.runs)));
        }
        if self.time_limit_s.is_nan() || self.time_limit_s <= 0.0 {
            return Err(HarnessError::Config(format!("time limit must be positive, got {}", self.time_limit_s)));
        }
        self.delay_model(0).validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn delay_model(&self, seed: u64) -> DelayModel {
        DelayModel::from_ms(self.delay_mean_ms, self.delay_stdev_ratio, seed)
    }

    pub fn engine_config(&self, seed: u64) -> EngineConfig {
        EngineConfig {
            policy: self.policy,
            seed,
            time_limit_us: (self.time_limit_s * 1e6) as u64,
            ..EngineConfig::default()
        }
    }
}

/// Seed of the `i`-th run of a batch.
pub fn run_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// One run of the whole multi-agent system.
pub fn run_once(problem: Arc<Problem>, cfg: &RunConfig, seed: u64) -> Result<SystemOutcome, HarnessError> {
    let delay = cfg.delay_model(seed);
    let engine = cfg.engine_config(seed);
    Ok(match cfg.mode {
        Mode::Sim => {
            let sampler = DelaySampler::new(&delay).map_err(|e| HarnessError::Config(e.to_string()))?;
            run_simulation(problem, &engine, Box::new(sampler))
        }
        Mode::Threads => run_threaded(problem, &engine, &delay),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: RunStatus,
    pub plan_valid: Option<bool>,
    pub cost: Option<f64>,
    pub wall_ms: f64,
    pub expanded: u64,
    pub sent_messages: u64,
    pub withheld_peak: u64,
}

impl RunRecord {
    pub fn from_outcome(seed: u64, o: &SystemOutcome) -> Self {
        RunRecord {
            seed,
            status: o.status,
            plan_valid: o.plan_valid,
            cost: o.cost,
            wall_ms: o.elapsed_us as f64 / 1000.0,
            expanded: o.expanded(),
            sent_messages: o.state_messages(),
            withheld_peak: o.withheld_peak(),
        }
    }

    /// Finished with a validated plan.
    pub fn solved(&self) -> bool {
        self.status == RunStatus::Solved && self.plan_valid == Some(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem: String,
    pub config: String,
    pub solved: bool,
    pub error: Option<String>,
    pub plan: Option<JointPlan>,
    /// Medians over solved runs.
    pub cost: Option<f64>,
    pub wall_ms: Option<f64>,
    /// Medians over solved runs, or over all runs when unsolved.
    pub expanded: f64,
    pub sent_messages: f64,
    pub withheld_peak: u64,
    pub runs: Vec<RunRecord>,
}

/// Median; the mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Solved iff a strict majority of runs solved it.
pub fn majority_solved(runs: &[RunRecord]) -> bool {
    2 * runs.iter().filter(|r| r.solved()).count() > runs.len()
}

pub fn aggregate_runs(problem: &str, config: &str, runs: Vec<RunRecord>, plan: Option<JointPlan>) -> ProblemRecord {
    let solved = majority_solved(&runs);
    let finished: Vec<&RunRecord> = runs.iter().filter(|r| r.solved()).collect();
    let basis: Vec<&RunRecord> = if solved { finished.clone() } else { runs.iter().collect() };
    let med = |f: &dyn Fn(&RunRecord) -> f64, rs: &[&RunRecord]| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
    ProblemRecord {
        problem: problem.to_string(),
        config: config.to_string(),
        solved,
        error: None,
        plan: if solved { plan } else { None },
        cost: if solved { med(&|r| r.cost.unwrap_or(0.0), &finished) } else { None },
        wall_ms: if solved { med(&|r| r.wall_ms, &finished) } else { None },
        expanded: med(&|r| r.expanded as f64, &basis).unwrap_or(0.0),
        sent_messages: med(&|r| r.sent_messages as f64, &basis).unwrap_or(0.0),
        withheld_peak: runs.iter().map(|r| r.withheld_peak).max().unwrap_or(0),
        runs,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub problems: usize,
    pub coverage: usize,
    /// Averages and sample standard deviations over solved problems.
    pub avg_time_ms: Option<f64>,
    pub stdev_time_ms: Option<f64>,
    pub avg_cost: Option<f64>,
    pub stdev_cost: Option<f64>,
    pub k_messages: Option<f64>,
    pub k_states: Option<f64>,
    /// Sums over all problems.
    pub expanded: f64,
    pub sent_messages: f64,
}

fn mean_stdev(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let stdev =
        if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (Some(mean), Some(stdev))
}

impl Aggregate {
    pub fn from_problems(problems: &[ProblemRecord]) -> Self {
        let solved: Vec<&ProblemRecord> = problems.iter().filter(|p| p.solved).collect();
        let (avg_time_ms, stdev_time_ms) = mean_stdev(&solved.iter().filter_map(|p| p.wall_ms).collect::<Vec<_>>());
        let (avg_cost, stdev_cost) = mean_stdev(&solved.iter().filter_map(|p| p.cost).collect::<Vec<_>>());
        let (msgs, _) = mean_stdev(&solved.iter().map(|p| p.sent_messages).collect::<Vec<_>>());
        let (states, _) = mean_stdev(&solved.iter().map(|p| p.expanded).collect::<Vec<_>>());
        Aggregate {
            problems: problems.len(),
            coverage: solved.len(),
            avg_time_ms,
            stdev_time_ms,
            avg_cost,
            stdev_cost,
            k_messages: msgs.map(|m| m / 1000.0),
            k_states: states.map(|s| s / 1000.0),
            expanded: problems.iter().map(|p| p.expanded).sum(),
            sent_messages: problems.iter().map(|p| p.sent_messages).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub config: RunConfig,
    pub problems: Vec<ProblemRecord>,
    pub aggregate: Aggregate,
}

impl ScoreBoard {
    pub fn new(config: RunConfig, problems: Vec<ProblemRecord>) -> Self {
        let aggregate = Aggregate::from_problems(&problems);
        ScoreBoard { config, problems, aggregate }
    }
}

/// `runs` runs of one problem with derived seeds.
pub fn run_problem(name: &str, problem: Arc<Problem>, cfg: &RunConfig) -> Result<ProblemRecord, HarnessError> {
    let mut runs = Vec::with_capacity(cfg.runs);
    let mut plan = None;
    for i in 0..cfg.runs {
        let seed = run_seed(cfg.seed, i);
        let o = run_once(Arc::clone(&problem), cfg, seed)?;
        log::info!("{name} run {i}: {:?} in {:.1} ms", o.status, o.elapsed_us as f64 / 1000.0);
        let rec = RunRecord::from_outcome(seed, &o);
        if rec.solved() && plan.is_none() {
            plan = o.plan.clone();
        }
        runs.push(rec);
    }
    Ok(aggregate_runs(name, &cfg.label, runs, plan))
}

fn task_name(path: &std::path::Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Run every task of the configuration. A task that fails to load is
/// recorded as unsolved with its error; the batch continues.
pub fn run_batch(cfg: &RunConfig) -> Result<ScoreBoard, HarnessError> {
    cfg.validate()?;
    let mut problems = Vec::with_capacity(cfg.tasks.len());
    for path in &cfg.tasks {
        let name = task_name(path);
        let loaded = std::fs::read(path)
            .map_err(|e| e.to_string())
            .and_then(|bytes| parse_task(&bytes).map_err(|e| e.to_string()));
        match loaded {
            Ok(problem) => problems.push(run_problem(&name, Arc::new(problem), cfg)?),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                let mut rec = aggregate_runs(&name, &cfg.label, Vec::new(), None);
                rec.error = Some(e);
                problems.push(rec);
            }
        }
    }
    Ok(ScoreBoard::new(cfg.clone(), problems))
}
