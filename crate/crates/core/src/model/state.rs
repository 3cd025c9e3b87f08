use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::problem::{ActionId, AgentId, FactId, Owner, Problem};

/// Opaque stand-in for one agent's private facts inside another agent's
/// state. Only the owning agent can map it back to facts.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(pub [u8; 32]);

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({})", &hex::encode(self.0)[..12])
    }
}

impl Serialize for Token {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Token(out))
    }
}

/// An action compiled to an agent's local fact indices.
#[derive(Debug, Clone)]
pub struct LocalAction {
    pub id: ActionId,
    pub pre: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
    pub cost: f64,
    pub public: bool,
}

/// One agent's window onto the problem: its known facts (public plus own
/// private) renumbered densely, and its own actions over that numbering.
#[derive(Debug, Clone)]
pub struct AgentView {
    agent: AgentId,
    num_agents: usize,
    known: Vec<FactId>,
    local_of: Vec<Option<u32>>,
    public_local: Vec<u32>,
    private_local: Vec<u32>,
    public_goals: Vec<u32>,
    private_goals: Vec<u32>,
    actions: Vec<LocalAction>,
    action_slot: Vec<Option<usize>>,
}

impl AgentView {
    pub fn new(problem: &Problem, agent: AgentId) -> Self {
        let known = problem.known_facts(agent);
        let mut local_of = vec![None; problem.facts().len()];
        for (i, f) in known.iter().enumerate() {
            local_of[f.index()] = Some(i as u32);
        }
        let loc = |f: &FactId| local_of[f.index()].expect("fact outside agent universe");
        let public_local = problem.public_facts().iter().map(loc).collect();
        let private_local = known.iter().filter(|f| problem.owner(**f) == Owner::Private(agent)).map(loc).collect();
        let public_goals = problem.public_goals().iter().map(loc).collect();
        let private_goals = problem.private_goals(agent).iter().map(loc).collect();
        let mut action_slot = vec![None; problem.actions().len()];
        let actions = problem
            .agent_actions(agent)
            .iter()
            .enumerate()
            .map(|(slot, id)| {
                action_slot[id.index()] = Some(slot);
                let a = problem.action(*id);
                LocalAction {
                    id: *id,
                    pre: a.pre.iter().map(loc).collect(),
                    add: a.add.iter().map(loc).collect(),
                    del: a.del.iter().map(loc).collect(),
                    cost: a.cost,
                    public: a.is_public(),
                }
            })
            .collect();
        AgentView {
            agent,
            num_agents: problem.num_agents(),
            known,
            local_of,
            public_local,
            private_local,
            public_goals,
            private_goals,
            actions,
            action_slot,
        }
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    pub fn num_public(&self) -> usize {
        self.public_local.len()
    }

    pub fn known_fact(&self, local: u32) -> FactId {
        self.known[local as usize]
    }

    pub fn local_index(&self, f: FactId) -> Option<u32> {
        self.local_of[f.index()]
    }

    /// Local index of the `k`-th public fact.
    pub fn public_local(&self) -> &[u32] {
        &self.public_local
    }

    pub fn private_local(&self) -> &[u32] {
        &self.private_local
    }

    pub fn public_goals(&self) -> &[u32] {
        &self.public_goals
    }

    pub fn private_goals(&self) -> &[u32] {
        &self.private_goals
    }

    pub fn actions(&self) -> &[LocalAction] {
        &self.actions
    }

    pub fn local_action(&self, id: ActionId) -> Option<&LocalAction> {
        self.action_slot.get(id.index()).copied().flatten().map(|s| &self.actions[s])
    }

    /// Local set for the facts of `facts` this agent knows.
    pub fn local_set<'a>(&self, facts: impl IntoIterator<Item = &'a FactId>) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.known.len());
        for f in facts {
            if let Some(l) = self.local_of[f.index()] {
                s.insert(l as usize);
            }
        }
        s
    }

    /// Own private facts true in `local`, as a set over local indices.
    pub fn private_part(&self, local: &FixedBitSet) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.known.len());
        for &l in &self.private_local {
            if local.contains(l as usize) {
                s.insert(l as usize);
            }
        }
        s
    }

    pub fn own_private_goals_hold(&self, local: &FixedBitSet) -> bool {
        self.private_goals.iter().all(|g| local.contains(*g as usize))
    }

    /// Root state from the initial facts, with the other agents' initial
    /// tokens and private-goal flags.
    pub fn initial_state(&self, problem: &Problem, foreign: Vec<Option<Token>>, goal_flags: Vec<bool>) -> State {
        let local = self.local_set(problem.init());
        let mut st = State { owner: self.agent, local, foreign, goal_flags };
        st.foreign[self.agent.index()] = None;
        st.goal_flags[self.agent.index()] = self.own_private_goals_hold(&st.local);
        st
    }

    fn own_action(&self, action: ActionId, state: &State) -> &LocalAction {
        assert_eq!(state.owner, self.agent, "state owned by another agent");
        self.local_action(action).unwrap_or_else(|| panic!("action {action:?} does not belong to {}", self.agent))
    }

    /// True iff the action's preconditions hold in the state's local part.
    ///
    /// Panics if the action belongs to another agent.
    pub fn applicable(&self, action: ActionId, state: &State) -> bool {
        let a = self.own_action(action, state);
        local_applicable(a, &state.local)
    }

    /// STRIPS successor `(local \ del) ∪ add`; foreign tokens are untouched.
    ///
    /// Panics if the action is not applicable.
    pub fn apply(&self, action: ActionId, state: &State) -> State {
        let a = self.own_action(action, state);
        assert!(local_applicable(a, &state.local), "action {action:?} not applicable");
        self.apply_local(a, state)
    }

    /// [`AgentView::apply`] for an already-resolved local action whose
    /// applicability was checked by the caller.
    pub fn apply_local(&self, a: &LocalAction, state: &State) -> State {
        let mut next = state.clone();
        for d in &a.del {
            next.local.set(*d as usize, false);
        }
        for x in &a.add {
            next.local.insert(*x as usize);
        }
        next.goal_flags[self.agent.index()] = self.own_private_goals_hold(&next.local);
        next
    }

    pub fn public_projection(&self, state: &State) -> PublicProjection {
        let mut bits = FixedBitSet::with_capacity(self.public_local.len());
        for (k, l) in self.public_local.iter().enumerate() {
            if state.local.contains(*l as usize) {
                bits.insert(k);
            }
        }
        PublicProjection { bits }
    }

    /// Public goals hold locally and every agent's private-goal flag is set.
    pub fn is_global_goal(&self, state: &State) -> bool {
        self.public_goals.iter().all(|g| state.local.contains(*g as usize))
            && self.own_private_goals_hold(&state.local)
            && state.goal_flags.iter().all(|f| *f)
    }
}

pub fn local_applicable(a: &LocalAction, local: &FixedBitSet) -> bool {
    a.pre.iter().all(|p| local.contains(*p as usize))
}

/// A search state as held by one agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub owner: AgentId,
    /// Truth values over the owner's known facts (local indices).
    pub local: FixedBitSet,
    /// Token per other agent; `None` at the owner's own slot.
    pub foreign: Vec<Option<Token>>,
    /// Per agent: all of that agent's private goals hold.
    pub goal_flags: Vec<bool>,
}

/// Restriction of a state to the public facts, indexed by public index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicProjection {
    bits: FixedBitSet,
}

impl PublicProjection {
    pub fn from_indices(num_public: usize, indices: &[u32]) -> Self {
        let mut bits = FixedBitSet::with_capacity(num_public);
        for i in indices {
            bits.insert(*i as usize);
        }
        PublicProjection { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.bits.contains(k)
    }

    /// Sorted public indices of true facts.
    pub fn indices(&self) -> Vec<u32> {
        self.bits.ones().map(|i| i as u32).collect()
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    /// Stable encoding: little-endian bit order, one byte per eight facts.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for i in self.bits.ones() {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::problem::{classify_facts, RawAction, RawProblem};

    // facts: p, q, r (public via two users), s (private to agent 0)
    fn fixture() -> Problem {
        let f = |i: u32| FactId(i);
        classify_facts(RawProblem {
            name: "t".into(),
            agents: vec!["a".into(), "b".into()],
            facts: vec!["p".into(), "q".into(), "r".into(), "s".into()],
            actions: vec![
                RawAction {
                    name: "pq".into(),
                    agent: AgentId(0),
                    pre: vec![f(0)],
                    add: vec![f(1)],
                    del: vec![f(0)],
                    cost: 1.0,
                },
                RawAction {
                    name: "prq".into(),
                    agent: AgentId(0),
                    pre: vec![f(0), f(2)],
                    add: vec![f(1)],
                    del: vec![],
                    cost: 1.0,
                },
                RawAction {
                    name: "noop".into(),
                    agent: AgentId(0),
                    pre: vec![],
                    add: vec![f(3)],
                    del: vec![],
                    cost: 1.0,
                },
                RawAction {
                    name: "uses".into(),
                    agent: AgentId(1),
                    pre: vec![f(0), f(1), f(2)],
                    add: vec![],
                    del: vec![],
                    cost: 1.0,
                },
            ],
            init: vec![f(0)],
            goals: vec![f(1)],
            declared_public: vec![],
        })
        .unwrap()
    }

    fn state(view: &AgentView, p: &Problem, facts: &[u32]) -> State {
        let ids: Vec<FactId> = facts.iter().map(|&i| FactId(i)).collect();
        let mut s = view.initial_state(p, vec![None; 2], vec![true; 2]);
        s.local = view.local_set(&ids);
        s
    }

    #[test]
    fn applicability() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let s = state(&v, &p, &[0, 1]);
        assert!(v.applicable(ActionId(0), &s));
        assert!(!v.applicable(ActionId(1), &s));
        assert!(v.applicable(ActionId(2), &s));
    }

    #[test]
    #[should_panic(expected = "does not belong")]
    fn foreign_action_is_contract_violation() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let s = state(&v, &p, &[0]);
        v.applicable(ActionId(3), &s);
    }

    #[test]
    fn apply_adds_and_deletes() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let s = state(&v, &p, &[0]);
        let n = v.apply(ActionId(0), &s);
        assert_eq!(n.local, v.local_set(&[FactId(1)]));
        assert_eq!(n.foreign, s.foreign);
    }

    #[test]
    fn apply_is_idempotent_on_present_adds() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let s = state(&v, &p, &[0, 2, 1]);
        let n = v.apply(ActionId(1), &s);
        assert_eq!(n.local, s.local);
    }

    #[test]
    #[should_panic(expected = "not applicable")]
    fn apply_inapplicable_panics() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let s = state(&v, &p, &[1]);
        v.apply(ActionId(0), &s);
    }

    #[test]
    fn projection_filters_private() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        assert!(v.public_projection(&state(&v, &p, &[3])).is_empty());
        let proj = v.public_projection(&state(&v, &p, &[0, 2, 3]));
        assert_eq!(proj.indices(), vec![0, 2]);
        assert_eq!(proj.canonical_bytes(), vec![0b101]);
    }

    #[test]
    fn goal_needs_every_flag() {
        let p = fixture();
        let v = AgentView::new(&p, AgentId(0));
        let mut s = state(&v, &p, &[1]);
        assert!(v.is_global_goal(&s));
        s.goal_flags[1] = false;
        assert!(!v.is_global_goal(&s));
    }
}
