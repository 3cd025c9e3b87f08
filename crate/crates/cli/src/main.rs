//! Command-line front end: solve one task, run benchmark batches, import
//! PDDL, and compare reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use maplanner::filter::{FilterPolicy, NumWaiting, NumWithheld, OutgoingH, WOut, WhoSend};
use maplanner::harness::{common_averages, ipc_scores, run_batch, run_once, Mode, RunConfig};
use maplanner::io::{document_to_json, import_pddl, parse_task, read_report, write_report};

#[derive(Parser, Debug)]
#[command(name = "maplanner", version, about = "Privacy-preserving multi-agent forward search planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one task and print the joint plan with run statistics.
    Solve {
        task: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Print the outcome as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run a batch of tasks several times each and write a report.
    Bench {
        /// Task files; replace the config's task list when given.
        tasks: Vec<PathBuf>,
        /// Run configuration JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        label: Option<String>,
        /// Report path; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Ground a STRIPS PDDL domain and problem into a task JSON file.
    ImportPddl {
        domain: PathBuf,
        problem: PathBuf,
        /// PDDL type whose objects are the agents.
        #[arg(long, default_value = "agent")]
        agent_type: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare two or more reports: per-config scores and common averages.
    Score {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct PolicyArgs {
    /// Outgoing novelty threshold: off, 1 or 2.
    #[arg(long, value_parser = parse_enum::<WOut>)]
    w_out: Option<WOut>,
    /// Waiting agents needed to trigger a release: 1, half or all.
    #[arg(long, value_parser = parse_enum::<NumWaiting>)]
    num_waiting: Option<NumWaiting>,
    /// Agents that release: waiting, notwaiting or all.
    #[arg(long, value_parser = parse_enum::<WhoSend>)]
    who_send: Option<WhoSend>,
    /// States released at a time: none, 1, group or all.
    #[arg(long, value_parser = parse_enum::<NumWithheld>)]
    num_withheld: Option<NumWithheld>,
    /// Heuristics partitioning the outgoing table: none or goal_relaxed.
    #[arg(long, value_parser = parse_enum::<OutgoingH>)]
    outgoing_h: Option<OutgoingH>,
    /// Never send two states with the same public projection.
    #[arg(long)]
    secure: bool,
    /// Public-only search, no release, unpartitioned outgoing table.
    #[arg(long)]
    strong_privacy: bool,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// sim (virtual time) or threads (loopback sockets).
    #[arg(long, value_parser = parse_enum::<Mode>)]
    mode: Option<Mode>,
    #[arg(long)]
    delay_mean_ms: Option<f64>,
    #[arg(long)]
    delay_stdev_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    time_limit_s: Option<f64>,
}

fn parse_enum<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn usage_error(msg: String) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

impl PolicyArgs {
    /// `base` with the flags applied; contradictions with the strong-privacy
    /// preset are usage errors.
    fn apply(&self, base: FilterPolicy) -> FilterPolicy {
        let mut p = base;
        if self.strong_privacy {
            if self.w_out == Some(WOut::Off) {
                usage_error("--strong-privacy needs --w-out 1 or 2".into());
            }
            if let Some(n) = self.num_withheld.filter(|n| *n != NumWithheld::None) {
                usage_error(format!("--strong-privacy conflicts with --num-withheld {n}"));
            }
            if let Some(h) = self.outgoing_h.filter(|h| *h != OutgoingH::None) {
                usage_error(format!("--strong-privacy conflicts with --outgoing-h {h}"));
            }
            let w = self.w_out.unwrap_or(if p.w_out == WOut::Off { WOut::One } else { p.w_out });
            p = FilterPolicy { secure_check: p.secure_check, ..FilterPolicy::strong_privacy(w) };
        }
        if let Some(w) = self.w_out {
            p.w_out = w;
        }
        if let Some(n) = self.num_waiting {
            p.num_waiting = n;
        }
        if let Some(w) = self.who_send {
            p.who_send = w;
        }
        if let Some(n) = self.num_withheld {
            p.num_withheld_states = n;
        }
        if let Some(h) = self.outgoing_h {
            p.outgoing_h_functions = h;
        }
        p.secure_check |= self.secure;
        p
    }
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(d) = self.delay_mean_ms {
            cfg.delay_mean_ms = d;
        }
        if let Some(r) = self.delay_stdev_ratio {
            cfg.delay_stdev_ratio = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.time_limit_s {
            cfg.time_limit_s = t;
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("writing stdout")
        }
    }
}

fn pretty(value: &serde_json::Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("json values serialize");
    out.push(b'\n');
    out
}

fn solve(task: &Path, policy: &PolicyArgs, run: &RunArgs, json: bool) -> Result<bool> {
    let problem = Arc::new(parse_task(&read(task)?).with_context(|| format!("loading {}", task.display()))?);
    let mut cfg = RunConfig { runs: 1, policy: policy.apply(FilterPolicy::default()), ..RunConfig::default() };
    run.apply(&mut cfg);
    cfg.validate()?;
    let o = run_once(problem, &cfg, cfg.seed)?;
    if json {
        let value = serde_json::json!({
            "status": o.status,
            "error": o.error,
            "plan": o.plan,
            "cost": o.cost,
            "plan_valid": o.plan_valid,
            "elapsed_ms": o.elapsed_us as f64 / 1000.0,
            "expanded": o.expanded(),
            "sent_messages": o.state_messages(),
            "withheld_peak": o.withheld_peak(),
        });
        emit(None, &pretty(&value))?;
    } else {
        for (i, step) in o.plan.iter().flatten().enumerate() {
            println!("{i:>3}: {} {}", step.agent, step.action);
        }
        println!("status: {}", serde_json::to_value(o.status)?.as_str().unwrap_or("unknown"));
        if let Some(e) = &o.error {
            println!("error: {e}");
        }
        if let Some(c) = o.cost {
            println!("cost: {c}");
        }
        if let Some(v) = o.plan_valid {
            println!("valid: {v}");
        }
        println!("expanded: {}", o.expanded());
        println!("sent messages: {}", o.state_messages());
        println!("time ms: {:.3}", o.elapsed_us as f64 / 1000.0);
    }
    Ok(o.solved())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve { task, policy, run, json } => {
            Ok(if solve(&task, &policy, &run, json)? { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench { tasks, config, policy, run, runs, label, output } => {
            let mut cfg: RunConfig = match &config {
                Some(path) => {
                    serde_json::from_slice(&read(path)?).with_context(|| format!("config {}", path.display()))?
                }
                None => RunConfig::default(),
            };
            cfg.policy = policy.apply(cfg.policy);
            run.apply(&mut cfg);
            if !tasks.is_empty() {
                cfg.tasks = tasks;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(l) = label {
                cfg.label = l;
            }
            if output.is_some() {
                cfg.output = output;
            }
            if cfg.tasks.is_empty() {
                bail!("no tasks given");
            }
            let board = run_batch(&cfg)?;
            emit(cfg.output.as_deref(), &write_report(&board))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ImportPddl { domain, problem, agent_type, output } => {
            let doc = import_pddl(&read(&domain)?, &read(&problem)?, &agent_type)?;
            emit(output.as_deref(), &document_to_json(&doc))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { reports, output } => {
            let boards = reports
                .iter()
                .map(|p| read(p).and_then(|b| read_report(&b).with_context(|| format!("report {}", p.display()))))
                .collect::<Result<Vec<_>>>()?;
            let value = serde_json::json!({
                "scores": ipc_scores(&boards)?,
                "common": common_averages(&boards)?,
            });
            emit(output.as_deref(), &pretty(&value))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
