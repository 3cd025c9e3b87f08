use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Dense agent index into [`Problem::agents`]. Serializes as an integer;
/// also decodes from a decimal string, the form JSON map keys take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = AgentId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an agent index")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<AgentId, E> {
                usize::try_from(v).map(AgentId).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<AgentId, E> {
                usize::try_from(v).map(AgentId).map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<AgentId, E> {
                v.parse().map(AgentId).map_err(E::custom)
            }
        }
        d.deserialize_any(Visitor)
    }
}

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent{}", self.0)
    }
}

/// Dense fact index; ids are contiguous from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactId(pub u32);

impl FactId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Owner {
    Public,
    Private(AgentId),
}

impl Owner {
    pub fn is_public(self) -> bool {
        matches!(self, Owner::Public)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub name: String,
    pub owner: Owner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: ActionId,
    pub name: String,
    pub agent: AgentId,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
    pub cost: f64,
    pub visibility: Visibility,
}

impl Action {
    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }

    /// Every fact id mentioned in preconditions or effects.
    pub fn mentioned(&self) -> impl Iterator<Item = FactId> + '_ {
        self.pre.iter().chain(&self.add).chain(&self.del).copied()
    }
}

/// An action before privacy classification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAction {
    pub name: String,
    pub agent: AgentId,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
    pub cost: f64,
}

/// A grounded task whose facts have not yet been classified.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawProblem {
    pub name: String,
    pub agents: Vec<String>,
    pub facts: Vec<String>,
    pub actions: Vec<RawAction>,
    pub init: Vec<FactId>,
    pub goals: Vec<FactId>,
    /// Facts forced public regardless of usage.
    pub declared_public: Vec<FactId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassificationWarning {
    /// Fact not mentioned by any action; classified public.
    Unused { fact: String, in_init_or_goal: bool },
}

/// Grounded, classified multi-agent STRIPS task.
///
/// Immutable once built; share it behind an `Arc` across agent workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    name: String,
    agents: Vec<String>,
    facts: Vec<Fact>,
    actions: Vec<Action>,
    init: Vec<FactId>,
    goals: Vec<FactId>,
    declared_public: Vec<FactId>,
    agent_actions: Vec<Vec<ActionId>>,
    public_facts: Vec<FactId>,
    public_index: Vec<Option<u32>>,
    warnings: Vec<ClassificationWarning>,
}

/// Classify every fact as public or private to one agent and derive action
/// visibility.
///
/// A fact is private to agent `i` when every action mentioning it belongs to
/// `i` and it is not declared public. Facts no action mentions are public.
pub fn classify_facts(raw: RawProblem) -> Result<Problem, ModelError> {
    if raw.agents.is_empty() {
        return Err(ModelError::NoAgents);
    }
    let n_facts = raw.facts.len();
    let check_fact = |f: FactId, ctx: &str| -> Result<(), ModelError> {
        if f.index() >= n_facts {
            Err(ModelError::UnknownFactId { id: f.0, context: ctx.to_string() })
        } else {
            Ok(())
        }
    };

    let mut seen_names = BTreeSet::new();
    for name in &raw.facts {
        if !seen_names.insert(name.as_str()) {
            return Err(ModelError::DuplicateFact(name.clone()));
        }
    }
    let mut seen_actions = BTreeSet::new();
    for a in &raw.actions {
        if a.agent.index() >= raw.agents.len() {
            return Err(ModelError::UnknownAgentId { id: a.agent.0, action: a.name.clone() });
        }
        if !seen_actions.insert(a.name.as_str()) {
            return Err(ModelError::DuplicateAction(a.name.clone()));
        }
        if !a.cost.is_finite() || a.cost < 0.0 {
            return Err(ModelError::InvalidCost { action: a.name.clone(), cost: a.cost });
        }
        for f in a.pre.iter().chain(&a.add).chain(&a.del) {
            check_fact(*f, &a.name)?;
        }
        if let Some(f) = a.add.iter().find(|f| a.del.contains(f)) {
            return Err(ModelError::AddDeleteOverlap { action: a.name.clone(), fact: raw.facts[f.index()].clone() });
        }
    }
    for f in raw.init.iter().chain(&raw.goals).chain(&raw.declared_public) {
        check_fact(*f, "init/goal")?;
    }

    // Which agents mention each fact.
    let mut users: Vec<BTreeSet<AgentId>> = vec![BTreeSet::new(); n_facts];
    for a in &raw.actions {
        for f in a.pre.iter().chain(&a.add).chain(&a.del) {
            users[f.index()].insert(a.agent);
        }
    }
    let declared: BTreeSet<FactId> = raw.declared_public.iter().copied().collect();
    let init_goal: BTreeSet<FactId> = raw.init.iter().chain(&raw.goals).copied().collect();

    let mut warnings = Vec::new();
    let facts: Vec<Fact> = raw
        .facts
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let id = FactId(i as u32);
            let owner = match users[i].len() {
                0 => {
                    warnings.push(ClassificationWarning::Unused {
                        fact: name.clone(),
                        in_init_or_goal: init_goal.contains(&id),
                    });
                    Owner::Public
                }
                1 if !declared.contains(&id) => Owner::Private(*users[i].iter().next().unwrap()),
                _ => Owner::Public,
            };
            Fact { id, name: name.clone(), owner }
        })
        .collect();
    for w in &warnings {
        log::warn!("{w:?}");
    }

    let sorted = |v: &[FactId]| -> Vec<FactId> {
        let s: BTreeSet<FactId> = v.iter().copied().collect();
        s.into_iter().collect()
    };

    let mut agent_actions = vec![Vec::new(); raw.agents.len()];
    let actions: Vec<Action> = raw
        .actions
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let id = ActionId(i as u32);
            agent_actions[a.agent.index()].push(id);
            let all_private =
                a.pre.iter().chain(&a.add).chain(&a.del).all(|f| facts[f.index()].owner == Owner::Private(a.agent));
            Action {
                id,
                pre: sorted(&a.pre),
                add: sorted(&a.add),
                del: sorted(&a.del),
                name: a.name,
                agent: a.agent,
                cost: a.cost,
                visibility: if all_private { Visibility::Private } else { Visibility::Public },
            }
        })
        .collect();

    let public_facts: Vec<FactId> = facts.iter().filter(|f| f.owner.is_public()).map(|f| f.id).collect();
    let mut public_index = vec![None; n_facts];
    for (k, f) in public_facts.iter().enumerate() {
        public_index[f.index()] = Some(k as u32);
    }

    Ok(Problem {
        name: raw.name,
        agents: raw.agents,
        facts,
        actions,
        init: sorted(&raw.init),
        goals: sorted(&raw.goals),
        declared_public: sorted(&raw.declared_public),
        agent_actions,
        public_facts,
        public_index,
        warnings,
    })
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|a| a == name).map(AgentId)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, id: FactId) -> &Fact {
        &self.facts[id.index()]
    }

    pub fn fact_by_name(&self, name: &str) -> Option<FactId> {
        self.facts.iter().find(|f| f.name == name).map(|f| f.id)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &Action {
        &self.actions[id.index()]
    }

    pub fn action_by_name(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Actions of one agent (`A_i`).
    pub fn agent_actions(&self, agent: AgentId) -> &[ActionId] {
        &self.agent_actions[agent.index()]
    }

    pub fn init(&self) -> &[FactId] {
        &self.init
    }

    pub fn goals(&self) -> &[FactId] {
        &self.goals
    }

    pub fn declared_public(&self) -> &[FactId] {
        &self.declared_public
    }

    /// Public facts in ascending fact-id order; position is the public index.
    pub fn public_facts(&self) -> &[FactId] {
        &self.public_facts
    }

    pub fn public_index(&self, f: FactId) -> Option<u32> {
        self.public_index[f.index()]
    }

    pub fn num_public(&self) -> usize {
        self.public_facts.len()
    }

    pub fn warnings(&self) -> &[ClassificationWarning] {
        &self.warnings
    }

    pub fn owner(&self, f: FactId) -> Owner {
        self.facts[f.index()].owner
    }

    /// Facts an agent may hold in plaintext: all public facts plus its own
    /// private ones, in ascending id order.
    pub fn known_facts(&self, agent: AgentId) -> Vec<FactId> {
        self.facts
            .iter()
            .filter(|f| match f.owner {
                Owner::Public => true,
                Owner::Private(a) => a == agent,
            })
            .map(|f| f.id)
            .collect()
    }

    pub fn private_goals(&self, agent: AgentId) -> Vec<FactId> {
        self.goals.iter().copied().filter(|g| self.owner(*g) == Owner::Private(agent)).collect()
    }

    pub fn public_goals(&self) -> Vec<FactId> {
        self.goals.iter().copied().filter(|g| self.owner(*g).is_public()).collect()
    }

    /// Exhaustive check that no private fact of agent `i` is mentioned by an
    /// action of another agent.
    pub fn check_privacy(&self) -> Result<(), ModelError> {
        for a in &self.actions {
            for f in a.mentioned() {
                if let Owner::Private(owner) = self.owner(f) {
                    if owner != a.agent {
                        return Err(ModelError::PrivacyViolation {
                            fact: self.fact(f).name.clone(),
                            action: a.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Table of fact name to owner name (`"public"` or the agent's name).
    pub fn classification_table(&self) -> BTreeMap<String, String> {
        self.facts
            .iter()
            .map(|f| {
                let owner = match f.owner {
                    Owner::Public => "public".to_string(),
                    Owner::Private(a) => self.agents[a.index()].clone(),
                };
                (f.name.clone(), owner)
            })
            .collect()
    }

    /// Rebuild the unclassified form, e.g. for re-serialization.
    pub fn to_raw(&self) -> RawProblem {
        RawProblem {
            name: self.name.clone(),
            agents: self.agents.clone(),
            facts: self.facts.iter().map(|f| f.name.clone()).collect(),
            actions: self
                .actions
                .iter()
                .map(|a| RawAction {
                    name: a.name.clone(),
                    agent: a.agent,
                    pre: a.pre.clone(),
                    add: a.add.clone(),
                    del: a.del.clone(),
                    cost: a.cost,
                })
                .collect(),
            init: self.init.clone(),
            goals: self.goals.clone(),
            declared_public: self.declared_public.clone(),
        }
    }
}
