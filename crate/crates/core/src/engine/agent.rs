use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::termination::{TerminationDetector, TerminationStep};
use crate::filter::{on_status_change, AgentStatus, Candidate, FilterPolicy, FilterStats, MessageFilter, WithheldKey};
use crate::heuristics::{goal_count, update_counters, GoalView, PathCounters, RelaxedPlanSet};
use crate::model::{ActionId, AgentId, AgentView, Problem, State, Token};
use crate::net::{
    encrypt_private_part, AgentKey, Envelope, MsgId, Payload, Recipient, SegmentKey, ShutdownReason, StatePayload,
    StatusPayload, StatusReport, TerminatePayload, TraceHop, TraceId, TraceReply, TraceRequest, TraceResult,
};
use crate::novelty::{AtomUniverse, NoveltyTable, NoveltyValue};

pub const COORDINATOR: AgentId = AgentId(0);

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentLink {
    Root,
    Local {
        node: NodeId,
        action: ActionId,
    },
    /// Received in the message with this id.
    Remote(MsgId),
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: State,
    pub g: f64,
    pub counters: PathCounters,
    pub parent: ParentLink,
    pub novelty: NoveltyValue,
    pub goal_count: u32,
    closed: bool,
    version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestResult {
    Inserted,
    Duplicate,
    Reopened,
    Malformed,
}

/// Lexicographic open-list key; smaller is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct OpenKey {
    novelty: u8,
    primary: i64,
    secondary: i64,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for every agent's initial token.
    Setup,
    Search,
    /// A goal was found somewhere; only trace and termination traffic.
    Stopped,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentOutcome {
    Solved { winner: TraceId },
    Exhausted,
    Error(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStats {
    pub expanded: u64,
    pub generated: u64,
    pub state_broadcasts: u64,
    pub states_received: u64,
    pub inserted: u64,
    pub duplicates: u64,
    pub reopened: u64,
    pub malformed: u64,
    pub filter: FilterStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub expanded: bool,
    pub processed: usize,
}

/// One planning agent as an event-driven state machine. Drivers feed
/// envelopes with [`Agent::deliver`], call [`Agent::step`] while
/// [`Agent::wants_work`] holds, and ship [`Agent::take_outbox`].
pub struct Agent {
    id: AgentId,
    n: usize,
    problem: Arc<Problem>,
    view: AgentView,
    relaxed: RelaxedPlanSet,
    strong: bool,
    key: AgentKey,
    book: HashMap<Token, FixedBitSet>,
    init_token: Token,
    hellos: Vec<Option<(Token, bool)>>,
    parked: Vec<Envelope>,
    phase: Phase,

    nodes: Vec<SearchNode>,
    index: HashMap<State, NodeId>,
    open: BinaryHeap<Reverse<(OpenKey, NodeId, u32)>>,
    /// Nodes not closed that have a current entry in `open`.
    open_live: usize,
    open_seq: u64,
    table: NoveltyTable,
    foreign_atoms: HashMap<(AgentId, Token), u32>,
    filter: MessageFilter<NodeId>,

    inbox: VecDeque<Envelope>,
    outbox: Vec<Envelope>,
    seq: u64,
    sent_nodes: HashMap<u64, NodeId>,
    sent_log: Vec<Vec<u32>>,

    statuses: Vec<AgentStatus>,
    last_report: Option<StatusReport>,
    state_sent: u64,
    state_received: u64,
    probe_pending: Option<u64>,
    detector: Option<TerminationDetector>,

    traces_started: u64,
    segments: BTreeMap<SegmentKey, Vec<ActionId>>,
    winner: Option<(TraceId, Vec<TraceHop>)>,
    outcome: Option<AgentOutcome>,
    stats: AgentStats,
}

impl Agent {
    pub fn new(problem: Arc<Problem>, id: AgentId, policy: FilterPolicy, seed: u64) -> Self {
        let view = AgentView::new(&problem, id);
        let relaxed = RelaxedPlanSet::extract(&problem, &view);
        let n = problem.num_agents();
        let key = AgentKey::derive(seed, id);
        let init_local = view.local_set(problem.init());
        let init_token = encrypt_private_part(&view, &init_local, &key);
        let mut book = HashMap::new();
        book.insert(init_token, view.private_part(&init_local));
        let mut hellos = vec![None; n];
        hellos[id.index()] = Some((init_token, view.own_private_goals_hold(&init_local)));
        let num_public = view.num_public();
        Agent {
            id,
            n,
            view,
            relaxed,
            strong: policy.is_strong_privacy(),
            key,
            book,
            init_token,
            hellos,
            parked: Vec::new(),
            phase: Phase::Setup,
            nodes: Vec::new(),
            index: HashMap::new(),
            open: BinaryHeap::new(),
            open_live: 0,
            open_seq: 0,
            table: NoveltyTable::new(AtomUniverse::Search, 2),
            foreign_atoms: HashMap::new(),
            filter: MessageFilter::new(policy, num_public),
            inbox: VecDeque::new(),
            outbox: Vec::new(),
            seq: 0,
            sent_nodes: HashMap::new(),
            sent_log: Vec::new(),
            statuses: vec![AgentStatus::Active; n],
            last_report: None,
            state_sent: 0,
            state_received: 0,
            probe_pending: None,
            detector: (id == COORDINATOR).then(|| TerminationDetector::new(n)),
            traces_started: 0,
            segments: BTreeMap::new(),
            winner: None,
            outcome: None,
            stats: AgentStats::default(),
            problem,
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    /// Announce the initial token; searching starts once all are known.
    pub fn start(&mut self) {
        let flag = self.hellos[self.id.index()].unwrap().1;
        self.emit(Recipient::All, Payload::Status(StatusPayload::Hello { token: self.init_token, goal_flag: flag }));
        self.maybe_finish_setup();
    }

    pub fn deliver(&mut self, env: Envelope) {
        self.inbox.push_back(env);
    }

    pub fn wants_work(&self) -> bool {
        if self.phase == Phase::Done {
            return false;
        }
        !self.inbox.is_empty() || (self.phase == Phase::Search && (self.probe_pending.is_some() || self.has_open()))
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn outcome(&self) -> Option<&AgentOutcome> {
        self.outcome.as_ref()
    }

    pub fn take_outbox(&mut self) -> Vec<Envelope> {
        std::mem::take(&mut self.outbox)
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats { filter: self.filter.stats(), ..self.stats }
    }

    pub fn withheld_len(&self) -> usize {
        self.filter.withheld_len()
    }

    /// Public projections of sent states, as public indices, in send order.
    pub fn sent_log(&self) -> &[Vec<u32>] {
        &self.sent_log
    }

    pub fn segment(&self, key: &SegmentKey) -> Option<&[ActionId]> {
        self.segments.get(key).map(Vec::as_slice)
    }

    /// Winning trace, known to the coordinator after a solved run.
    pub fn winner(&self) -> Option<&(TraceId, Vec<TraceHop>)> {
        self.winner.as_ref()
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    /// Process all pending input, expand at most one node, then report
    /// status changes.
    pub fn step(&mut self) -> StepReport {
        let mut report = StepReport::default();
        while let Some(env) = self.inbox.pop_front() {
            if self.phase == Phase::Done {
                self.inbox.clear();
                break;
            }
            self.process(env);
            report.processed += 1;
        }
        if self.phase == Phase::Search {
            if let Some(id) = self.pop_open() {
                self.expand(id);
                report.expanded = true;
            }
        }
        self.refresh_status();
        report
    }

    fn emit(&mut self, to: Recipient, payload: Payload) -> MsgId {
        let id = MsgId { agent: self.id, seq: self.seq };
        self.seq += 1;
        let env = Envelope::new(id, to, payload);
        if to == Recipient::Agent(self.id) {
            self.inbox.push_back(env);
        } else if self.n > 1 {
            self.outbox.push(env);
        }
        id
    }

    fn finish(&mut self, outcome: AgentOutcome) {
        log::debug!("agent {} finished: {:?}", self.id, outcome);
        self.outcome = Some(outcome);
        self.phase = Phase::Done;
        self.open.clear();
        self.open_live = 0;
        self.inbox.clear();
        self.probe_pending = None;
    }

    // ---- setup ----

    fn maybe_finish_setup(&mut self) {
        if self.phase != Phase::Setup || self.hellos.iter().any(Option::is_none) {
            return;
        }
        let foreign =
            (0..self.n).map(|a| if a == self.id.index() { None } else { Some(self.hellos[a].unwrap().0) }).collect();
        let flags = self.hellos.iter().map(|h| h.unwrap().1).collect();
        let root = self.view.initial_state(&self.problem, foreign, flags);
        let counters = PathCounters::restart(&root, &self.relaxed, 0, 0);
        self.insert_node(root, 0.0, counters, ParentLink::Root);
        self.phase = Phase::Search;
        for env in std::mem::take(&mut self.parked) {
            self.inbox.push_back(env);
        }
    }

    // ---- search ----

    fn has_open(&self) -> bool {
        self.open_live > 0
    }

    fn pop_open(&mut self) -> Option<NodeId> {
        while let Some(Reverse((_, id, v))) = self.open.pop() {
            if !self.nodes[id].closed && self.nodes[id].version == v {
                self.open_live -= 1;
                return Some(id);
            }
        }
        None
    }

    fn push_open(&mut self, id: NodeId) {
        let node = &self.nodes[id];
        let (primary, secondary) = if self.strong {
            (node.counters.public_depth as i64, 0)
        } else {
            (node.goal_count as i64, -(node.counters.r_count() as i64))
        };
        let key = OpenKey { novelty: node.novelty.rank(), primary, secondary, seq: self.open_seq };
        self.open_seq += 1;
        self.open.push(Reverse((key, id, node.version)));
    }

    fn foreign_atom(&mut self, agent: AgentId, token: Token) -> u32 {
        let base = self.view.num_known() as u32;
        let next = base + self.foreign_atoms.len() as u32;
        *self.foreign_atoms.entry((agent, token)).or_insert(next)
    }

    fn evaluate(&mut self, state: &State, counters: &PathCounters) -> (NoveltyValue, u32) {
        if self.strong {
            let gc = goal_count(&self.view, state, GoalView::PublicOnly);
            let atoms = self.view.public_projection(state).indices();
            (self.table.evaluate_and_insert(&atoms, &[gc as i64]), gc)
        } else {
            let gc = goal_count(&self.view, state, GoalView::Full);
            let mut atoms: Vec<u32> = state.local.ones().map(|i| i as u32).collect();
            for (a, t) in state.foreign.iter().enumerate() {
                if let Some(t) = t {
                    atoms.push(self.foreign_atom(AgentId(a), *t));
                }
            }
            let key = [gc as i64, counters.r_count() as i64];
            (self.table.evaluate_and_insert(&atoms, &key), gc)
        }
    }

    fn insert_node(&mut self, state: State, g: f64, counters: PathCounters, parent: ParentLink) -> NodeId {
        let (novelty, goal_count) = self.evaluate(&state, &counters);
        let id = self.nodes.len();
        self.index.insert(state.clone(), id);
        self.nodes.push(SearchNode { state, g, counters, parent, novelty, goal_count, closed: false, version: 0 });
        self.open_live += 1;
        self.push_open(id);
        id
    }

    fn reopen(&mut self, id: NodeId, g: f64, counters: PathCounters, parent: ParentLink) {
        let node = &mut self.nodes[id];
        node.g = g;
        node.counters = counters;
        node.parent = parent;
        if node.closed {
            self.open_live += 1;
        }
        node.closed = false;
        node.version += 1;
        self.push_open(id);
    }

    fn expand(&mut self, id: NodeId) {
        self.nodes[id].closed = true;
        self.stats.expanded += 1;
        if self.view.is_global_goal(&self.nodes[id].state) {
            self.goal_found(id);
            return;
        }
        for slot in 0..self.view.actions().len() {
            let a = &self.view.actions()[slot];
            if !crate::model::local_applicable(a, &self.nodes[id].state.local) {
                continue;
            }
            let (action, public, cost) = (a.id, a.public, a.cost);
            let child = self.view.apply_local(a, &self.nodes[id].state);
            let g = self.nodes[id].g + cost;
            let counters = update_counters(&self.nodes[id].counters, &child, &self.relaxed, public);
            let parent = ParentLink::Local { node: id, action };
            self.stats.generated += 1;
            match self.index.get(&child) {
                Some(&existing) => {
                    if g < self.nodes[existing].g {
                        self.reopen(existing, g, counters, parent);
                    }
                }
                None => {
                    let child_id = self.insert_node(child, g, counters, parent);
                    if public && self.n > 1 {
                        self.offer(child_id);
                    }
                }
            }
        }
    }

    fn offer(&mut self, id: NodeId) {
        let node = &self.nodes[id];
        let projection = self.view.public_projection(&node.state);
        let public_goal_count = goal_count(&self.view, &node.state, GoalView::PublicOnly);
        let public_r = self
            .view
            .public_local()
            .iter()
            .filter(|l| self.relaxed.facts().contains(**l as usize) && node.state.local.contains(**l as usize))
            .count();
        let candidate = Candidate {
            item: id,
            projection,
            out_key: vec![public_goal_count as i64, public_r as i64],
            rank: WithheldKey { goal_count: node.goal_count, r_count: node.counters.r_count() },
        };
        if let (_, Some(id)) = self.filter.on_public_child(candidate) {
            self.send_state(id);
        }
    }

    fn send_state(&mut self, id: NodeId) {
        let node = &self.nodes[id];
        let own = encrypt_private_part(&self.view, &node.state.local, &self.key);
        self.book.entry(own).or_insert_with(|| self.view.private_part(&node.state.local));
        let mut tokens: BTreeMap<AgentId, Token> =
            node.state.foreign.iter().enumerate().filter_map(|(a, t)| t.map(|t| (AgentId(a), t))).collect();
        tokens.insert(self.id, own);
        let public_facts = self.view.public_projection(&node.state).indices();
        let payload = StatePayload {
            public_facts: public_facts.clone(),
            tokens,
            goal_flags: node.state.goal_flags.clone(),
            g: node.g,
            depth: node.counters.public_depth,
        };
        let msg = self.emit(Recipient::All, Payload::State(payload));
        self.sent_nodes.insert(msg.seq, id);
        self.sent_log.push(public_facts);
        self.state_sent += (self.n - 1) as u64;
        self.stats.state_broadcasts += 1;
    }

    fn release(&mut self) -> usize {
        let ids = self.filter.release_withheld();
        let k = ids.len();
        for id in ids {
            self.send_state(id);
        }
        k
    }

    /// Insert a received state, keep it as a duplicate, or reopen on a
    /// strictly cheaper path. Received states are never forwarded.
    pub fn ingest_state_message(&mut self, from: MsgId, p: &StatePayload) -> IngestResult {
        let res = self.ingest(from, p);
        match res {
            IngestResult::Inserted => self.stats.inserted += 1,
            IngestResult::Duplicate => self.stats.duplicates += 1,
            IngestResult::Reopened => self.stats.reopened += 1,
            IngestResult::Malformed => self.stats.malformed += 1,
        }
        res
    }

    fn ingest(&mut self, from: MsgId, p: &StatePayload) -> IngestResult {
        let num_public = self.view.num_public();
        if p.goal_flags.len() != self.n
            || p.tokens.len() != self.n
            || p.public_facts.iter().any(|k| *k as usize >= num_public)
            || p.g.is_nan()
            || p.g < 0.0
        {
            return IngestResult::Malformed;
        }
        let Some(own) = p.tokens.get(&self.id).and_then(|t| self.book.get(t)) else {
            return IngestResult::Malformed;
        };
        let mut local = own.clone();
        for k in &p.public_facts {
            local.insert(self.view.public_local()[*k as usize] as usize);
        }
        let mut foreign = vec![None; self.n];
        for (a, t) in &p.tokens {
            if a.index() >= self.n {
                return IngestResult::Malformed;
            }
            if *a != self.id {
                foreign[a.index()] = Some(*t);
            }
        }
        let mut goal_flags = p.goal_flags.clone();
        goal_flags[self.id.index()] = self.view.own_private_goals_hold(&local);
        let state = State { owner: self.id, local, foreign, goal_flags };
        let counters = PathCounters::restart(&state, &self.relaxed, p.depth, p.depth);
        match self.index.get(&state) {
            Some(&existing) if p.g < self.nodes[existing].g => {
                self.reopen(existing, p.g, counters, ParentLink::Remote(from));
                IngestResult::Reopened
            }
            Some(_) => IngestResult::Duplicate,
            None => {
                self.insert_node(state, p.g, counters, ParentLink::Remote(from));
                IngestResult::Inserted
            }
        }
    }

    // ---- messages ----

    fn process(&mut self, env: Envelope) {
        let from = env.sender();
        if matches!(env.payload, Payload::State(_)) && self.phase == Phase::Setup {
            self.parked.push(env);
            return;
        }
        match env.payload {
            Payload::State(p) => {
                self.state_received += 1;
                self.stats.states_received += 1;
                if self.phase == Phase::Search {
                    self.ingest_state_message(env.id, &p);
                }
            }
            Payload::Status(StatusPayload::Hello { token, goal_flag }) => {
                if from.index() < self.n {
                    self.hellos[from.index()] = Some((token, goal_flag));
                    self.maybe_finish_setup();
                }
            }
            Payload::Status(StatusPayload::Report(r)) => {
                self.statuses[from.index()] = r.status;
                self.observe_report(from, r);
                if self.phase == Phase::Search
                    && on_status_change(&self.statuses, self.filter.policy()).includes(self.id)
                {
                    self.release();
                }
            }
            Payload::Status(StatusPayload::Probe { round }) => {
                if self.phase == Phase::Search {
                    self.probe_pending = Some(round);
                }
            }
            Payload::Terminate(t) => self.on_terminate(t),
            Payload::TraceReq(req) => self.on_trace_request(req),
            Payload::TraceRep(rep) => self.on_trace_reply(rep),
        }
    }

    fn observe_report(&mut self, from: AgentId, r: StatusReport) {
        let Some(det) = self.detector.as_mut() else { return };
        if self.phase != Phase::Search {
            return;
        }
        match det.observe(from, r) {
            TerminationStep::Continue => {}
            TerminationStep::StartRound(round) => {
                self.emit(Recipient::All, Payload::Status(StatusPayload::Probe { round }));
                self.probe_pending = Some(round);
            }
            TerminationStep::FailExhausted => {
                self.emit(
                    Recipient::All,
                    Payload::Terminate(TerminatePayload::Shutdown { reason: ShutdownReason::Exhausted, winner: None }),
                );
                self.finish(AgentOutcome::Exhausted);
            }
        }
    }

    fn current_status(&self) -> AgentStatus {
        if self.phase != Phase::Search || !self.inbox.is_empty() || self.has_open() {
            AgentStatus::Active
        } else if self.filter.withheld_len() > 0 {
            AgentStatus::PartiallyEmpty
        } else {
            AgentStatus::Empty
        }
    }

    fn publish(&mut self, status: AgentStatus, round: Option<u64>) {
        let r = StatusReport {
            status,
            state_sent: self.state_sent,
            state_received: self.state_received,
            withheld: self.filter.withheld_len() as u64,
            round,
        };
        self.last_report = Some(r);
        self.emit(Recipient::All, Payload::Status(StatusPayload::Report(r)));
        self.observe_report(self.id, r);
    }

    /// Broadcast on status change, on counter change while waiting, and in
    /// answer to a probe; evaluate the release trigger on own status change.
    fn refresh_status(&mut self) {
        loop {
            if self.phase != Phase::Search {
                self.probe_pending = None;
                return;
            }
            let st = self.current_status();
            let counts = |r: &StatusReport| (r.status, r.state_sent, r.state_received, r.withheld);
            let now = StatusReport {
                status: st,
                state_sent: self.state_sent,
                state_received: self.state_received,
                withheld: self.filter.withheld_len() as u64,
                round: None,
            };
            let mut acted = false;
            if let Some(round) = self.probe_pending.take() {
                self.publish(st, Some(round));
                acted = true;
            } else {
                let changed_status = self.last_report.map(|r| r.status) != Some(st);
                let changed_counts = self.last_report.map(|r| counts(&r)) != Some(counts(&now));
                if changed_status || (st.is_waiting() && changed_counts) {
                    self.publish(st, None);
                    acted = true;
                }
            }
            if self.phase != Phase::Search {
                return;
            }
            if self.statuses[self.id.index()] != st {
                self.statuses[self.id.index()] = st;
                if on_status_change(&self.statuses, self.filter.policy()).includes(self.id) && self.release() > 0 {
                    acted = true;
                }
            }
            if !acted {
                return;
            }
        }
    }

    // ---- goal, trace, termination ----

    fn goal_found(&mut self, id: NodeId) {
        let trace = TraceId { agent: self.id, serial: self.traces_started };
        self.traces_started += 1;
        log::debug!("agent {} found a goal state, trace {:?}", self.id, trace);
        self.phase = Phase::Stopped;
        self.emit(Recipient::All, Payload::Terminate(TerminatePayload::GoalFound { trace }));
        self.trace_from(trace, id, None, Vec::new());
    }

    /// Walk the local parent chain from `id` back to the root or to the
    /// message it was received in. Actions come out in execution order.
    fn walk(&self, mut id: NodeId) -> Result<(Vec<ActionId>, Option<MsgId>), String> {
        let mut actions = Vec::new();
        for _ in 0..=self.nodes.len() {
            match self.nodes[id].parent {
                ParentLink::Root => {
                    actions.reverse();
                    return Ok((actions, None));
                }
                ParentLink::Remote(m) => {
                    actions.reverse();
                    return Ok((actions, Some(m)));
                }
                ParentLink::Local { node, action } => {
                    actions.push(action);
                    id = node;
                }
            }
        }
        Err(format!("agent {}: cyclic parent chain", self.id))
    }

    fn trace_from(&mut self, trace: TraceId, id: NodeId, from_msg: Option<MsgId>, later: Vec<TraceHop>) {
        let (segment, end) = match self.walk(id) {
            Ok(x) => x,
            Err(e) => return self.reply_trace(trace, TraceResult::Failed(e)),
        };
        let key = SegmentKey { trace, from_msg };
        let public_actions =
            segment.iter().map(|a| self.problem.action(*a)).filter(|a| a.is_public()).map(|a| a.name.clone()).collect();
        self.segments.insert(key, segment);
        let mut hops = Vec::with_capacity(later.len() + 1);
        hops.push(TraceHop { agent: self.id, key, public_actions });
        hops.extend(later);
        match end {
            None => self.reply_trace(trace, TraceResult::Complete(hops)),
            Some(m) => {
                self.emit(Recipient::Agent(m.agent), Payload::TraceReq(TraceRequest { trace, target: m, hops }));
            }
        }
    }

    fn reply_trace(&mut self, trace: TraceId, result: TraceResult) {
        self.emit(Recipient::Agent(trace.agent), Payload::TraceRep(TraceReply { trace, result }));
    }

    fn on_trace_request(&mut self, req: TraceRequest) {
        match self.sent_nodes.get(&req.target.seq) {
            Some(&id) if req.target.agent == self.id => self.trace_from(req.trace, id, Some(req.target), req.hops),
            _ => self.reply_trace(req.trace, TraceResult::Failed(format!("unknown message id {:?}", req.target))),
        }
    }

    fn on_trace_reply(&mut self, rep: TraceReply) {
        if rep.trace.agent != self.id {
            return;
        }
        let t = match rep.result {
            TraceResult::Complete(hops) => TerminatePayload::PlanReady { trace: rep.trace, hops },
            TraceResult::Failed(reason) => TerminatePayload::TraceFailed { trace: rep.trace, reason },
        };
        self.emit(Recipient::Agent(COORDINATOR), Payload::Terminate(t));
    }

    fn on_terminate(&mut self, t: TerminatePayload) {
        match t {
            TerminatePayload::GoalFound { .. } => {
                if self.phase == Phase::Search {
                    self.phase = Phase::Stopped;
                }
            }
            TerminatePayload::PlanReady { trace, hops } if self.id == COORDINATOR && self.winner.is_none() => {
                self.winner = Some((trace, hops));
                self.emit(
                    Recipient::All,
                    Payload::Terminate(TerminatePayload::Shutdown {
                        reason: ShutdownReason::Solved,
                        winner: Some(trace),
                    }),
                );
                self.finish(AgentOutcome::Solved { winner: trace });
            }
            TerminatePayload::TraceFailed { reason, .. } if self.id == COORDINATOR && self.winner.is_none() => {
                self.emit(
                    Recipient::All,
                    Payload::Terminate(TerminatePayload::Shutdown { reason: ShutdownReason::Error, winner: None }),
                );
                self.finish(AgentOutcome::Error(reason));
            }
            TerminatePayload::Shutdown { reason, winner } => {
                let outcome = match (reason, winner) {
                    (ShutdownReason::Solved, Some(w)) => AgentOutcome::Solved { winner: w },
                    (ShutdownReason::Exhausted, _) => AgentOutcome::Exhausted,
                    _ => AgentOutcome::Error("shutdown on error".into()),
                };
                self.finish(outcome);
            }
            _ => {}
        }
    }
}
