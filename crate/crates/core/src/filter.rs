//! Outgoing message filtering.
//!
//! Every state an agent generates with a public action is a candidate
//! message. [`MessageFilter::on_public_child`] decides whether it is sent now,
//! withheld for later, or dropped, based on its outgoing novelty: the novelty
//! of its public projection with respect to the projections this agent has
//! already transmitted. Withheld states are released by
//! [`MessageFilter::release_withheld`] when [`on_status_change`] reports that
//! enough agents are waiting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentId, PublicProjection};
use crate::novelty::{AtomUniverse, NoveltyTable, PartitionKey, Probe};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("unknown value `{value}` for {field}")]
    UnknownValue { field: &'static str, value: String },
}

macro_rules! policy_enum {
    ($(#[$m:meta])* $name:ident, $field:literal, { $($variant:ident => [$($text:literal),+]),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => [$($text),+][0]),+ }
            }
        }

        impl FromStr for $name {
            type Err = PolicyError;
            fn from_str(s: &str) -> Result<Self, PolicyError> {
                let lower = s.to_ascii_lowercase();
                $(if [$($text),+].contains(&lower.as_str()) { return Ok($name::$variant); })+
                Err(PolicyError::UnknownValue { field: $field, value: s.to_string() })
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

policy_enum!(
    /// Highest outgoing novelty a state may have and still be sent.
    WOut, "w_out", { Off => ["off", "none"], One => ["1", "one"], Two => ["2", "two"] }
);
policy_enum!(
    /// How many agents must be waiting before withheld states are released.
    NumWaiting, "num_waiting", { One => ["1", "one"], Half => ["half"], All => ["all"] }
);
policy_enum!(
    /// Which agents release their withheld states.
    WhoSend, "who_send", { Waiting => ["waiting", "wait"], NotWaiting => ["notwaiting", "not_waiting", "not-waiting"], All => ["all"] }
);
policy_enum!(
    /// How many withheld states are released at a time.
    NumWithheld, "num_withheld_states", { None => ["none"], One => ["1", "one"], Group => ["group"], All => ["all"] }
);
policy_enum!(
    /// Heuristic functions partitioning the outgoing novelty table.
    OutgoingH, "outgoing_h_functions", { None => ["none"], GoalAndRelaxed => ["goal_relaxed", "g_r"] }
);

impl WOut {
    fn level(self) -> Option<u8> {
        match self {
            WOut::Off => None,
            WOut::One => Some(1),
            WOut::Two => Some(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub w_out: WOut,
    pub num_waiting: NumWaiting,
    pub who_send: WhoSend,
    pub num_withheld_states: NumWithheld,
    pub secure_check: bool,
    pub outgoing_h_functions: OutgoingH,
}

impl Default for FilterPolicy {
    /// `w_out = 1`, `num_waiting = half`, `who_send = all`,
    /// `num_withheld_states = group`, outgoing novelty partitioned by the
    /// search counters.
    fn default() -> Self {
        FilterPolicy {
            w_out: WOut::One,
            num_waiting: NumWaiting::Half,
            who_send: WhoSend::All,
            num_withheld_states: NumWithheld::Group,
            secure_check: false,
            outgoing_h_functions: OutgoingH::GoalAndRelaxed,
        }
    }
}

impl FilterPolicy {
    /// No filtering: every public state is sent.
    pub fn unfiltered() -> Self {
        FilterPolicy { w_out: WOut::Off, ..Default::default() }
    }

    /// Filtering without any release: states over the threshold are dropped
    /// and no heuristic partitions the outgoing table.
    pub fn strong_privacy(w_out: WOut) -> Self {
        FilterPolicy {
            w_out,
            num_withheld_states: NumWithheld::None,
            outgoing_h_functions: OutgoingH::None,
            ..Default::default()
        }
    }

    pub fn is_strong_privacy(&self) -> bool {
        self.w_out != WOut::Off
            && self.num_withheld_states == NumWithheld::None
            && self.outgoing_h_functions == OutgoingH::None
    }
}

/// Search status an agent reports to the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgentStatus {
    Active,
    /// Open list empty, no pending input, some withheld states.
    PartiallyEmpty,
    /// Open list empty, no pending input, nothing withheld.
    Empty,
}

impl AgentStatus {
    pub fn is_waiting(self) -> bool {
        !matches!(self, AgentStatus::Active)
    }
}

/// Outcome of evaluating the release trigger over a status vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleasePlan {
    pub fired: bool,
    pub senders: Vec<AgentId>,
}

impl ReleasePlan {
    pub fn includes(&self, agent: AgentId) -> bool {
        self.fired && self.senders.contains(&agent)
    }
}

/// Release trigger: fires when at least 1, ⌈n/2⌉ or n agents are waiting,
/// and selects the releasing agents by `who_send`. When `who_send` selects
/// nobody (every agent waits under `not_waiting`) the waiting agents release.
pub fn on_status_change(statuses: &[AgentStatus], policy: &FilterPolicy) -> ReleasePlan {
    let n = statuses.len();
    let threshold = match policy.num_waiting {
        NumWaiting::One => 1,
        NumWaiting::Half => n.div_ceil(2),
        NumWaiting::All => n,
    };
    let waiting: Vec<AgentId> = (0..n).filter(|i| statuses[*i].is_waiting()).map(AgentId).collect();
    if n == 0 || waiting.len() < threshold {
        return ReleasePlan { fired: false, senders: Vec::new() };
    }
    let senders = match policy.who_send {
        WhoSend::Waiting => waiting,
        WhoSend::All => (0..n).map(AgentId).collect(),
        WhoSend::NotWaiting => {
            let active: Vec<AgentId> = (0..n).filter(|i| !statuses[*i].is_waiting()).map(AgentId).collect();
            if active.is_empty() {
                waiting
            } else {
                active
            }
        }
    };
    ReleasePlan { fired: true, senders }
}

/// Ordering key of withheld states: fewer unachieved goals first, then more
/// relaxed-plan facts achieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WithheldKey {
    pub goal_count: u32,
    pub r_count: u32,
}

impl Ord for WithheldKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.goal_count.cmp(&other.goal_count).then(other.r_count.cmp(&self.r_count))
    }
}

impl PartialOrd for WithheldKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A state generated by a public action, offered for transmission.
#[derive(Debug, Clone)]
pub struct Candidate<T> {
    pub item: T,
    pub projection: PublicProjection,
    /// Partition of the outgoing table; ignored without outgoing h-functions.
    pub out_key: PartitionKey,
    pub rank: WithheldKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Sent,
    Withheld,
    Suppressed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub offered: u64,
    pub sent: u64,
    pub withheld: u64,
    pub suppressed: u64,
    pub released: u64,
    pub withheld_peak: u64,
}

#[derive(Debug)]
struct Withheld<T> {
    item: T,
    projection: PublicProjection,
    probe: Option<Probe>,
}

/// Per-agent filter state: outgoing novelty table, withheld list and the set
/// of projections already sent.
#[derive(Debug)]
pub struct MessageFilter<T> {
    policy: FilterPolicy,
    table: Option<NoveltyTable>,
    withheld: BTreeMap<(WithheldKey, u64), Withheld<T>>,
    next_seq: u64,
    sent_projections: HashSet<Vec<u8>>,
    stats: FilterStats,
}

impl<T> MessageFilter<T> {
    pub fn new(policy: FilterPolicy, num_public: usize) -> Self {
        let table = policy.w_out.level().map(|lvl| NoveltyTable::new(AtomUniverse::Outgoing { size: num_public }, lvl));
        MessageFilter {
            policy,
            table,
            withheld: BTreeMap::new(),
            next_seq: 0,
            sent_projections: HashSet::new(),
            stats: FilterStats::default(),
        }
    }

    pub fn policy(&self) -> &FilterPolicy {
        &self.policy
    }

    pub fn stats(&self) -> FilterStats {
        self.stats
    }

    pub fn withheld_len(&self) -> usize {
        self.withheld.len()
    }

    fn already_sent(&self, projection: &PublicProjection) -> bool {
        self.policy.secure_check && self.sent_projections.contains(&projection.canonical_bytes())
    }

    fn record_sent(&mut self, projection: &PublicProjection, probe: Option<&Probe>) {
        if let (Some(table), Some(probe)) = (self.table.as_mut(), probe) {
            table.commit(probe).expect("probe taken on this filter's table");
        }
        if self.policy.secure_check {
            self.sent_projections.insert(projection.canonical_bytes());
        }
        self.stats.sent += 1;
    }

    /// Decide what to do with a freshly generated public state. The item is
    /// handed back when it should be transmitted now.
    pub fn on_public_child(&mut self, c: Candidate<T>) -> (Decision, Option<T>) {
        self.stats.offered += 1;
        if self.already_sent(&c.projection) {
            self.stats.suppressed += 1;
            return (Decision::Suppressed, None);
        }
        let (Some(level), Some(table)) = (self.policy.w_out.level(), self.table.as_ref()) else {
            self.record_sent(&c.projection, None);
            return (Decision::Sent, Some(c.item));
        };
        let key: &[i64] = match self.policy.outgoing_h_functions {
            OutgoingH::None => &[],
            OutgoingH::GoalAndRelaxed => &c.out_key,
        };
        let probe = table.probe(&c.projection.indices(), key);
        if probe.value().rank() <= level {
            self.record_sent(&c.projection, Some(&probe));
            return (Decision::Sent, Some(c.item));
        }
        if self.policy.num_withheld_states == NumWithheld::None {
            self.stats.suppressed += 1;
            return (Decision::Suppressed, None);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.withheld.insert((c.rank, seq), Withheld { item: c.item, projection: c.projection, probe: Some(probe) });
        self.stats.withheld += 1;
        self.stats.withheld_peak = self.stats.withheld_peak.max(self.withheld.len() as u64);
        (Decision::Withheld, None)
    }

    /// Release withheld states per `num_withheld_states`: nothing, the single
    /// best entry, every entry sharing the best key, or the whole list.
    /// Entries dropped by the secure check do not count, so a release that
    /// finds something to send always sends at least one state.
    pub fn release_withheld(&mut self) -> Vec<T> {
        let mut out = Vec::new();
        if self.policy.num_withheld_states == NumWithheld::None {
            return out;
        }
        while out.is_empty() && !self.withheld.is_empty() {
            let batch: Vec<(WithheldKey, u64)> = match self.policy.num_withheld_states {
                NumWithheld::None => unreachable!(),
                NumWithheld::One => self.withheld.keys().take(1).copied().collect(),
                NumWithheld::Group => {
                    let min = self.withheld.keys().next().unwrap().0;
                    self.withheld.keys().take_while(|(k, _)| *k == min).copied().collect()
                }
                NumWithheld::All => self.withheld.keys().copied().collect(),
            };
            for k in batch {
                let w = self.withheld.remove(&k).unwrap();
                if self.already_sent(&w.projection) {
                    self.stats.suppressed += 1;
                    continue;
                }
                self.record_sent(&w.projection, w.probe.as_ref());
                self.stats.released += 1;
                out.push(w.item);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AgentStatus::*;

    fn proj(ix: &[u32]) -> PublicProjection {
        PublicProjection::from_indices(6, ix)
    }

    fn cand(id: u32, ix: &[u32], g: u32) -> Candidate<u32> {
        Candidate { item: id, projection: proj(ix), out_key: vec![], rank: WithheldKey { goal_count: g, r_count: 0 } }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("half".parse::<NumWaiting>().unwrap(), NumWaiting::Half);
        assert_eq!("notwaiting".parse::<WhoSend>().unwrap(), WhoSend::NotWaiting);
        assert_eq!("1".parse::<NumWithheld>().unwrap(), NumWithheld::One);
        assert_eq!("off".parse::<WOut>().unwrap(), WOut::Off);
        assert!("3".parse::<WOut>().is_err());
    }

    #[test]
    fn off_sends_everything() {
        let mut f = MessageFilter::new(FilterPolicy::unfiltered(), 6);
        assert_eq!(f.on_public_child(cand(0, &[1], 0)).0, Decision::Sent);
        assert_eq!(f.on_public_child(cand(1, &[1], 0)).0, Decision::Sent);
        assert_eq!(f.withheld_len(), 0);
    }

    #[test]
    fn repeated_atoms_are_withheld() {
        let mut f = MessageFilter::new(FilterPolicy::default(), 6);
        assert_eq!(f.on_public_child(cand(0, &[0], 0)), (Decision::Sent, Some(0)));
        assert_eq!(f.on_public_child(cand(1, &[1], 0)), (Decision::Sent, Some(1)));
        assert_eq!(f.on_public_child(cand(2, &[0, 1], 0)), (Decision::Withheld, None));
    }

    #[test]
    fn withheld_does_not_pollute_table() {
        let mut f = MessageFilter::new(FilterPolicy::default(), 6);
        f.on_public_child(cand(0, &[0], 0));
        assert_eq!(f.on_public_child(cand(1, &[0], 0)).0, Decision::Withheld);
        assert_eq!(f.on_public_child(cand(2, &[0, 2], 0)).0, Decision::Sent);
    }

    #[test]
    fn secure_check_precedes_novelty() {
        let mut f = MessageFilter::new(FilterPolicy { secure_check: true, ..Default::default() }, 6);
        f.on_public_child(cand(0, &[0, 1], 0));
        assert_eq!(f.on_public_child(cand(1, &[0, 1], 0)).0, Decision::Suppressed);
        assert_eq!(f.withheld_len(), 0);
    }

    #[test]
    fn none_drops_instead_of_withholding() {
        let mut f = MessageFilter::new(FilterPolicy::strong_privacy(WOut::One), 6);
        f.on_public_child(cand(0, &[0], 0));
        assert_eq!(f.on_public_child(cand(1, &[0], 0)).0, Decision::Suppressed);
        assert!(f.release_withheld().is_empty());
    }

    fn loaded(nws: NumWithheld) -> MessageFilter<u32> {
        let mut f = MessageFilter::new(FilterPolicy { num_withheld_states: nws, ..Default::default() }, 6);
        f.on_public_child(cand(99, &[0], 0));
        for (id, g) in [(10, 2), (11, 1), (12, 1)] {
            assert_eq!(f.on_public_child(cand(id, &[0], g)).0, Decision::Withheld);
        }
        f
    }

    #[test]
    fn release_empty_list() {
        let mut f: MessageFilter<u32> = MessageFilter::new(FilterPolicy::default(), 6);
        assert!(f.release_withheld().is_empty());
    }

    #[test]
    fn release_group_sends_all_best() {
        let mut f = loaded(NumWithheld::Group);
        assert_eq!(f.release_withheld(), vec![11, 12]);
        assert_eq!(f.release_withheld(), vec![10]);
    }

    #[test]
    fn release_one_takes_lowest_insertion() {
        let mut f = loaded(NumWithheld::One);
        assert_eq!(f.release_withheld(), vec![11]);
        assert_eq!(f.withheld_len(), 2);
    }

    #[test]
    fn release_all_drains() {
        let mut f = loaded(NumWithheld::All);
        assert_eq!(f.release_withheld(), vec![11, 12, 10]);
        assert_eq!(f.stats().withheld_peak, 3);
    }

    #[test]
    fn release_skips_secure_duplicates() {
        let mut f = MessageFilter::new(
            FilterPolicy { secure_check: true, num_withheld_states: NumWithheld::One, ..Default::default() },
            6,
        );
        f.on_public_child(cand(0, &[0], 0));
        f.on_public_child(cand(1, &[0, 1], 0)); // sent: new atom 1
        f.on_public_child(cand(2, &[1], 0)); // withheld
        f.on_public_child(cand(3, &[0, 1, 2], 5)); // sent: new atom 2
                                                   // 2 duplicates nothing sent; released normally
        assert_eq!(f.release_withheld(), vec![2]);
        assert_eq!(f.on_public_child(cand(4, &[0, 1], 0)).0, Decision::Suppressed);
    }

    #[test]
    fn trigger_half_of_four() {
        let p = FilterPolicy::default();
        assert!(!on_status_change(&[Empty, Active, Active, Active], &p).fired);
        let plan = on_status_change(&[Empty, PartiallyEmpty, Active, Active], &p);
        assert!(plan.fired);
        assert_eq!(plan.senders, (0..4).map(AgentId).collect::<Vec<_>>());
    }

    #[test]
    fn trigger_all_needs_everyone() {
        let p = FilterPolicy { num_waiting: NumWaiting::All, ..Default::default() };
        assert!(!on_status_change(&[Empty, PartiallyEmpty, Active], &p).fired);
        assert!(on_status_change(&[Empty, PartiallyEmpty, Empty], &p).fired);
    }

    #[test]
    fn who_send_selection() {
        let st = [PartiallyEmpty, Active, Active];
        let w = FilterPolicy { num_waiting: NumWaiting::One, who_send: WhoSend::Waiting, ..Default::default() };
        assert_eq!(on_status_change(&st, &w).senders, vec![AgentId(0)]);
        let nw = FilterPolicy { who_send: WhoSend::NotWaiting, ..w };
        assert_eq!(on_status_change(&st, &nw).senders, vec![AgentId(1), AgentId(2)]);
        let all_waiting = [PartiallyEmpty, Empty, PartiallyEmpty];
        assert_eq!(on_status_change(&all_waiting, &nw).senders.len(), 3);
    }

    #[test]
    fn strong_privacy_preset() {
        assert!(FilterPolicy::strong_privacy(WOut::Two).is_strong_privacy());
        assert!(!FilterPolicy::default().is_strong_privacy());
    }
}
