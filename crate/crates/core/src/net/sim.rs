use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{DelaySource, Envelope, Kind, MsgId, TransportStats};
use crate::model::AgentId;

#[derive(Debug)]
struct Pending {
    deliver_us: u64,
    seq: u64,
    to: AgentId,
    env: Envelope,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        (self.deliver_us, self.seq) == (other.deliver_us, other.seq)
    }
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.deliver_us, self.seq).cmp(&(other.deliver_us, other.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub id: MsgId,
    pub to: AgentId,
    pub kind: Kind,
    pub enqueue_us: u64,
    pub deliver_us: u64,
}

/// Virtual-time network. Each delivery is delayed independently and
/// channels stay FIFO: a delivery never overtakes an earlier one on the
/// same sender-recipient pair.
pub struct SimNetwork {
    n: usize,
    delays: Box<dyn DelaySource>,
    channel_last: Vec<u64>,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    stats: TransportStats,
    schedule: Vec<ScheduleEntry>,
}

impl SimNetwork {
    pub fn new(n: usize, delays: Box<dyn DelaySource>) -> Self {
        SimNetwork {
            n,
            delays,
            channel_last: vec![0; n * n],
            queue: BinaryHeap::new(),
            seq: 0,
            stats: TransportStats::new(n),
            schedule: Vec::new(),
        }
    }

    /// Enqueue at virtual time `now_us`, one delivery per recipient.
    pub fn send(&mut self, env: Envelope, now_us: u64) {
        let from = env.sender();
        for to in env.recipients(self.n) {
            let ch = from.index() * self.n + to.index();
            let deliver_us = (now_us + self.delays.delay_us(from, to)).max(self.channel_last[ch]);
            self.channel_last[ch] = deliver_us;
            let mut copy = env.clone();
            copy.enqueue_us = now_us;
            copy.deliver_us = deliver_us;
            self.stats.record_send(from, copy.kind());
            self.schedule.push(ScheduleEntry { id: copy.id, to, kind: copy.kind(), enqueue_us: now_us, deliver_us });
            self.queue.push(Reverse(Pending { deliver_us, seq: self.seq, to, env: copy }));
            self.seq += 1;
        }
    }

    pub fn next_delivery_us(&self) -> Option<u64> {
        self.queue.peek().map(|p| p.0.deliver_us)
    }

    /// Earliest pending delivery.
    pub fn pop(&mut self) -> Option<(AgentId, Envelope)> {
        let Reverse(p) = self.queue.pop()?;
        self.stats.record_delivery(p.to);
        Some((p.to, p.env))
    }

    pub fn in_flight(&self) -> u64 {
        self.queue.len() as u64
    }

    pub fn stats(&self) -> &TransportStats {
        &self.stats
    }

    /// Every delivery in send order.
    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{ChannelDelays, Payload, Recipient, StatusPayload};

    fn probe(from: usize, seq: u64, to: Recipient) -> Envelope {
        Envelope::new(MsgId { agent: AgentId(from), seq }, to, Payload::Status(StatusPayload::Probe { round: seq }))
    }

    #[test]
    fn same_channel_keeps_order() {
        let mut net = SimNetwork::new(2, Box::new(ChannelDelays::uniform(2, 0)));
        net.send(probe(0, 1, Recipient::All), 0);
        net.send(probe(0, 2, Recipient::All), 0);
        assert_eq!(net.pop().unwrap().1.id.seq, 1);
        assert_eq!(net.pop().unwrap().1.id.seq, 2);
        assert!(net.pop().is_none());
    }

    #[test]
    fn shorter_delay_arrives_first() {
        let mut d = ChannelDelays::uniform(3, 0);
        d.set(AgentId(0), AgentId(2), 10_000);
        d.set(AgentId(1), AgentId(2), 1_000);
        let mut net = SimNetwork::new(3, Box::new(d));
        net.send(probe(0, 1, Recipient::Agent(AgentId(2))), 0);
        net.send(probe(1, 1, Recipient::Agent(AgentId(2))), 0);
        let (to, e) = net.pop().unwrap();
        assert_eq!((to, e.sender(), e.deliver_us), (AgentId(2), AgentId(1), 1_000));
    }

    #[test]
    fn fifo_clamps_later_sends() {
        struct Shrinking(u64);
        impl DelaySource for Shrinking {
            fn delay_us(&mut self, _: AgentId, _: AgentId) -> u64 {
                self.0 = self.0.saturating_sub(600);
                self.0
            }
        }
        let mut net = SimNetwork::new(2, Box::new(Shrinking(1_200)));
        net.send(probe(0, 1, Recipient::All), 0); // delay 600
        net.send(probe(0, 2, Recipient::All), 100); // delay 0, clamped to 600
        let a = net.pop().unwrap().1;
        let b = net.pop().unwrap().1;
        assert_eq!((a.id.seq, b.id.seq), (1, 2));
        assert_eq!(b.deliver_us, 600);
        assert!(b.deliver_us >= b.enqueue_us);
    }

    #[test]
    fn conservation() {
        let mut net = SimNetwork::new(3, Box::new(ChannelDelays::uniform(3, 5)));
        net.send(probe(0, 1, Recipient::All), 0);
        net.send(probe(2, 1, Recipient::Agent(AgentId(1))), 0);
        assert_eq!(net.stats().sent, 3);
        net.pop();
        assert_eq!(net.stats().delivered + net.in_flight(), net.stats().sent);
    }
}
