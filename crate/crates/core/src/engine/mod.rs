//! Per-agent search and the two drivers that run a set of agents: a
//! deterministic virtual-time scheduler and one OS thread per agent over
//! loopback sockets.

mod agent;
mod termination;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use agent::{
    Agent, AgentOutcome, AgentStats, IngestResult, NodeId, ParentLink, SearchNode, StepReport, COORDINATOR,
};
pub use termination::{detect_global_termination, quiescent, TerminationDetector, TerminationStep};

pub use crate::filter::AgentStatus;
use crate::filter::FilterPolicy;
use crate::model::{validate_plan, ActionId, AgentId, JointPlan, PlanStep, Problem};
use crate::net::{
    socket_mesh, DelayModel, DelaySource, Envelope, SegmentKey, SimNetwork, TraceHop, Transport, TransportStats,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub policy: FilterPolicy,
    pub seed: u64,
    /// Virtual time in simulation, wall time with threads.
    pub time_limit_us: u64,
    /// Virtual cost of one node expansion.
    pub expansion_cost_us: u64,
    /// Keep a copy of every delivered envelope (simulation only).
    pub record_envelopes: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            policy: FilterPolicy::default(),
            seed: 0,
            time_limit_us: 300_000_000,
            expansion_cost_us: 50,
            record_envelopes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Solved,
    Exhausted,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutcome {
    pub status: RunStatus,
    pub error: Option<String>,
    pub plan: Option<JointPlan>,
    pub cost: Option<f64>,
    pub plan_valid: Option<bool>,
    pub elapsed_us: u64,
    pub agents: Vec<AgentStats>,
    pub withheld_at_end: Vec<usize>,
    /// Per agent, public projections of sent states in send order.
    pub sent_projections: Vec<Vec<Vec<u32>>>,
    pub transport: TransportStats,
    #[serde(skip)]
    pub envelopes: Vec<Envelope>,
}

impl SystemOutcome {
    pub fn solved(&self) -> bool {
        self.status == RunStatus::Solved && self.plan_valid == Some(true)
    }

    pub fn expanded(&self) -> u64 {
        self.agents.iter().map(|a| a.expanded).sum()
    }

    /// State messages transmitted, one per broadcast.
    pub fn state_messages(&self) -> u64 {
        self.agents.iter().map(|a| a.state_broadcasts).sum()
    }

    pub fn withheld_peak(&self) -> u64 {
        self.agents.iter().map(|a| a.filter.withheld_peak).max().unwrap_or(0)
    }
}

/// Joint plan from a completed trace: each hop's locally stored segment,
/// earliest hop first.
pub fn assemble_plan(
    problem: &Problem,
    hops: &[TraceHop],
    segment_of: impl Fn(AgentId, &SegmentKey) -> Option<Vec<ActionId>>,
) -> Result<JointPlan, String> {
    let mut plan = Vec::new();
    for hop in hops {
        let seg = segment_of(hop.agent, &hop.key)
            .ok_or_else(|| format!("agent {} has no segment for {:?}", hop.agent, hop.key))?;
        let public: Vec<&str> =
            seg.iter().map(|a| problem.action(*a)).filter(|a| a.is_public()).map(|a| a.name.as_str()).collect();
        if public != hop.public_actions {
            return Err(format!("agent {} segment disagrees with its trace hop", hop.agent));
        }
        for a in seg {
            let action = problem.action(a);
            plan.push(PlanStep { agent: problem.agents()[action.agent.index()].clone(), action: action.name.clone() });
        }
    }
    Ok(plan)
}

fn collect(
    problem: &Problem,
    agents: &[Agent],
    fallback: (RunStatus, Option<String>),
    elapsed_us: u64,
    transport: TransportStats,
) -> SystemOutcome {
    let mut out = SystemOutcome {
        status: fallback.0,
        error: fallback.1,
        plan: None,
        cost: None,
        plan_valid: None,
        elapsed_us,
        agents: agents.iter().map(Agent::stats).collect(),
        withheld_at_end: agents.iter().map(Agent::withheld_len).collect(),
        sent_projections: agents.iter().map(|a| a.sent_log().to_vec()).collect(),
        transport,
        envelopes: Vec::new(),
    };
    match agents[COORDINATOR.index()].outcome() {
        Some(AgentOutcome::Solved { .. }) => {
            let hops = &agents[COORDINATOR.index()].winner().expect("coordinator records the winner").1;
            match assemble_plan(problem, hops, |a, k| agents[a.index()].segment(k).map(<[_]>::to_vec)) {
                Ok(plan) => {
                    let v = validate_plan(problem, &plan);
                    out.status = RunStatus::Solved;
                    out.error = None;
                    out.cost = Some(v.cost);
                    out.plan_valid = Some(v.valid);
                    if !v.valid {
                        out.error = Some(format!("invalid plan: {:?}", v.failure));
                    }
                    out.plan = Some(plan);
                }
                Err(e) => {
                    out.status = RunStatus::Error;
                    out.error = Some(e);
                }
            }
        }
        Some(AgentOutcome::Exhausted) => {
            out.status = RunStatus::Exhausted;
            out.error = None;
        }
        Some(AgentOutcome::Error(e)) => {
            out.status = RunStatus::Error;
            out.error = Some(e.clone());
        }
        None => {}
    }
    out
}

fn make_agents(problem: &Arc<Problem>, cfg: &EngineConfig) -> Vec<Agent> {
    problem.agent_ids().map(|id| Agent::new(Arc::clone(problem), id, cfg.policy, cfg.seed)).collect()
}

/// Run all agents under one virtual clock. Each step costs
/// `expansion_cost_us` per expansion plus 1 µs; deliveries due at the same
/// instant as a wake-up are handed over first.
pub fn run_simulation(problem: Arc<Problem>, cfg: &EngineConfig, delays: Box<dyn DelaySource>) -> SystemOutcome {
    let n = problem.num_agents();
    let mut agents = make_agents(&problem, cfg);
    let mut net = SimNetwork::new(n, delays);
    let mut wakes: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut wake_seq = 0u64;
    let mut scheduled = vec![false; n];
    let mut busy_until = vec![0u64; n];
    let mut envelopes = Vec::new();
    let mut now = 0u64;

    for (i, a) in agents.iter_mut().enumerate() {
        a.start();
        for env in a.take_outbox() {
            net.send(env, 0);
        }
        wakes.push(Reverse((0, wake_seq, i)));
        wake_seq += 1;
        scheduled[i] = true;
    }

    let fallback = loop {
        if agents[COORDINATOR.index()].is_done() {
            break (RunStatus::Error, None);
        }
        let next_wake = wakes.peek().map(|w| w.0 .0);
        let next_net = net.next_delivery_us();
        let deliver = match (next_net, next_wake) {
            (None, None) => break (RunStatus::Error, Some("simulation stalled: no pending events".into())),
            (Some(d), Some(w)) => d <= w,
            (Some(_), None) => true,
            (None, Some(_)) => false,
        };
        now = if deliver { next_net.unwrap() } else { next_wake.unwrap() };
        if now > cfg.time_limit_us {
            now = cfg.time_limit_us;
            break (RunStatus::Timeout, None);
        }
        if deliver {
            let (to, env) = net.pop().unwrap();
            let i = to.index();
            if cfg.record_envelopes {
                envelopes.push(env.clone());
            }
            agents[i].deliver(env);
            if !scheduled[i] && !agents[i].is_done() {
                wakes.push(Reverse((now.max(busy_until[i]), wake_seq, i)));
                wake_seq += 1;
                scheduled[i] = true;
            }
            continue;
        }
        let Reverse((_, _, i)) = wakes.pop().unwrap();
        scheduled[i] = false;
        if agents[i].is_done() {
            continue;
        }
        let r = agents[i].step();
        let end = now + 1 + if r.expanded { cfg.expansion_cost_us } else { 0 };
        busy_until[i] = end;
        for env in agents[i].take_outbox() {
            net.send(env, end);
        }
        if agents[i].wants_work() {
            wakes.push(Reverse((end, wake_seq, i)));
            wake_seq += 1;
            scheduled[i] = true;
        }
    };
    let mut out = collect(&problem, &agents, fallback, now, net.stats().clone());
    out.envelopes = envelopes;
    out
}

enum Exit {
    Finished,
    Timeout,
    Failed(String),
}

fn drive<T: Transport>(agent: &mut Agent, transport: &mut T, limit: Duration, started: Instant) -> Exit {
    let flush = |agent: &mut Agent, t: &mut T| -> Result<(), String> {
        for env in agent.take_outbox() {
            t.send(env).map_err(|e| e.to_string())?;
        }
        Ok(())
    };
    agent.start();
    if let Err(e) = flush(agent, transport) {
        return Exit::Failed(e);
    }
    loop {
        if agent.is_done() {
            return Exit::Finished;
        }
        if started.elapsed() > limit {
            return Exit::Timeout;
        }
        let wait = if agent.wants_work() { Duration::ZERO } else { Duration::from_millis(2) };
        match transport.recv_timeout(wait) {
            Ok(Some(env)) => {
                agent.deliver(env);
                while let Ok(Some(env)) = transport.recv_timeout(Duration::ZERO) {
                    agent.deliver(env);
                }
            }
            Ok(None) => {}
            Err(e) => return Exit::Failed(e.to_string()),
        }
        if agent.wants_work() {
            agent.step();
            if let Err(e) = flush(agent, transport) {
                return Exit::Failed(e);
            }
        }
    }
}

/// One thread per agent over a loopback TCP mesh; the time limit is wall
/// clock.
pub fn run_threaded(problem: Arc<Problem>, cfg: &EngineConfig, delay: &DelayModel) -> SystemOutcome {
    let n = problem.num_agents();
    let started = Instant::now();
    let limit = Duration::from_micros(cfg.time_limit_us);
    let endpoints = match socket_mesh(n, delay) {
        Ok(e) => e,
        Err(e) => {
            let agents = make_agents(&problem, cfg);
            return collect(&problem, &agents, (RunStatus::Error, Some(e.to_string())), 0, TransportStats::new(n));
        }
    };
    let handles: Vec<_> = make_agents(&problem, cfg)
        .into_iter()
        .zip(endpoints)
        .map(|(mut agent, mut transport)| {
            std::thread::spawn(move || {
                let exit = drive(&mut agent, &mut transport, limit, started);
                let stats = transport.stats().clone();
                transport.close();
                (agent, exit, stats)
            })
        })
        .collect();
    let mut agents = Vec::with_capacity(n);
    let mut stats = TransportStats::new(n);
    let mut fallback = (RunStatus::Error, None);
    for h in handles {
        let (agent, exit, s) = h.join().expect("agent thread panicked");
        stats.sent += s.sent;
        stats.delivered += s.delivered;
        for i in 0..n {
            stats.sent_by_agent[i] += s.sent_by_agent[i];
            stats.delivered_to_agent[i] += s.delivered_to_agent[i];
        }
        for (k, v) in s.sent_by_kind {
            *stats.sent_by_kind.entry(k).or_default() += v;
        }
        match exit {
            Exit::Timeout if fallback.0 != RunStatus::Timeout => fallback = (RunStatus::Timeout, None),
            Exit::Failed(e) => fallback = (RunStatus::Error, Some(e)),
            _ => {}
        }
        agents.push(agent);
    }
    collect(&problem, &agents, fallback, started.elapsed().as_micros() as u64, stats)
}
