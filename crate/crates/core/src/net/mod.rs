//! Message layer: envelopes, private-part tokens, delay injection, framing,
//! and two transports (virtual-time simulation and loopback TCP).

mod delay;
mod envelope;
pub mod frame;
mod sim;
mod socket;
mod token;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgentId;

pub use delay::{sample_delay, ChannelDelays, DelayModel, DelaySampler, DelaySource};
pub use envelope::{
    Envelope, Kind, MsgId, Payload, Recipient, SegmentKey, ShutdownReason, StatePayload, StatusPayload, StatusReport,
    TerminatePayload, TraceHop, TraceId, TraceReply, TraceRequest, TraceResult,
};
pub use frame::{frame, unframe, FrameError};
pub use sim::{ScheduleEntry, SimNetwork};
pub use socket::{socket_mesh, SocketTransport};
pub use token::{digest_fact_ids, encrypt_private_part, AgentKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("transport closed")]
    Closed,
    #[error("i/o: {0}")]
    Io(String),
}

/// Delivery counts. A broadcast counts once per recipient.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportStats {
    pub sent: u64,
    pub delivered: u64,
    pub sent_by_agent: Vec<u64>,
    pub delivered_to_agent: Vec<u64>,
    pub sent_by_kind: BTreeMap<Kind, u64>,
}

impl TransportStats {
    pub fn new(n: usize) -> Self {
        TransportStats { sent_by_agent: vec![0; n], delivered_to_agent: vec![0; n], ..Default::default() }
    }

    fn record_send(&mut self, from: AgentId, kind: Kind) {
        self.sent += 1;
        self.sent_by_agent[from.index()] += 1;
        *self.sent_by_kind.entry(kind).or_default() += 1;
    }

    fn record_delivery(&mut self, to: AgentId) {
        self.delivered += 1;
        self.delivered_to_agent[to.index()] += 1;
    }
}

/// An agent's endpoint in threaded mode.
pub trait Transport: Send {
    fn me(&self) -> AgentId;
    /// Microseconds since the transport's epoch.
    fn now_us(&self) -> u64;
    /// Stamp and dispatch to every recipient other than the sender.
    fn send(&mut self, env: Envelope) -> Result<(), NetError>;
    /// Next envelope whose delivery time has passed, waiting up to `timeout`.
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Envelope>, NetError>;
    fn stats(&self) -> &TransportStats;
}
