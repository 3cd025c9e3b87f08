use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::filter::AgentStatus;
use crate::model::{AgentId, Token};

/// Unique per sender: `(sender, sequence)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MsgId {
    pub agent: AgentId,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    All,
    Agent(AgentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Kind {
    State,
    Status,
    Terminate,
    TraceReq,
    TraceRep,
}

/// A search state in transit. Carries no private fact of any agent: each
/// agent's private part appears only as that agent's token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    /// Sorted public indices of the true public facts.
    pub public_facts: Vec<u32>,
    pub tokens: BTreeMap<AgentId, Token>,
    pub goal_flags: Vec<bool>,
    pub g: f64,
    /// Public actions on the path; private actions are not counted.
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub status: AgentStatus,
    /// State deliveries sent (one per recipient).
    pub state_sent: u64,
    pub state_received: u64,
    pub withheld: u64,
    /// Set when answering a confirmation probe.
    pub round: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StatusPayload {
    /// Setup: the sender's initial token and private-goal flag.
    Hello {
        token: Token,
        goal_flag: bool,
    },
    Report(StatusReport),
    Probe {
        round: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceId {
    pub agent: AgentId,
    pub serial: u64,
}

/// Identifies one agent's locally stored plan segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentKey {
    pub trace: TraceId,
    /// Message whose source node ends the segment; `None` at the goal end.
    pub from_msg: Option<MsgId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHop {
    pub agent: AgentId,
    pub key: SegmentKey,
    pub public_actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRequest {
    pub trace: TraceId,
    pub target: MsgId,
    /// Segments collected so far, earliest first.
    pub hops: Vec<TraceHop>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceResult {
    Complete(Vec<TraceHop>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReply {
    pub trace: TraceId,
    pub result: TraceResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShutdownReason {
    Solved,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TerminatePayload {
    GoalFound { trace: TraceId },
    PlanReady { trace: TraceId, hops: Vec<TraceHop> },
    TraceFailed { trace: TraceId, reason: String },
    Shutdown { reason: ShutdownReason, winner: Option<TraceId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Payload {
    State(StatePayload),
    Status(StatusPayload),
    Terminate(TerminatePayload),
    TraceReq(TraceRequest),
    TraceRep(TraceReply),
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::State(_) => Kind::State,
            Payload::Status(_) => Kind::Status,
            Payload::Terminate(_) => Kind::Terminate,
            Payload::TraceReq(_) => Kind::TraceReq,
            Payload::TraceRep(_) => Kind::TraceRep,
        }
    }
}

/// Invariant: `deliver_us >= enqueue_us` once stamped by a transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub id: MsgId,
    pub recipient: Recipient,
    #[serde(flatten)]
    pub payload: Payload,
    pub enqueue_us: u64,
    pub deliver_us: u64,
}

impl Envelope {
    pub fn new(id: MsgId, recipient: Recipient, payload: Payload) -> Self {
        Envelope { id, recipient, payload, enqueue_us: 0, deliver_us: 0 }
    }

    pub fn sender(&self) -> AgentId {
        self.id.agent
    }

    pub fn kind(&self) -> Kind {
        self.payload.kind()
    }

    /// Recipients among `n` agents; never includes the sender.
    pub fn recipients(&self, n: usize) -> Vec<AgentId> {
        match self.recipient {
            Recipient::All => (0..n).map(AgentId).filter(|a| *a != self.sender()).collect(),
            Recipient::Agent(a) if a != self.sender() && a.index() < n => vec![a],
            Recipient::Agent(_) => Vec::new(),
        }
    }
}
