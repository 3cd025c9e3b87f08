use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{classify_facts, AgentId, FactId, Problem, RawAction, RawProblem};

fn default_cost() -> f64 {
    1.0
}

/// Canonical JSON form of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    pub name: String,
    pub agents: Vec<String>,
    pub facts: Vec<String>,
    pub init: Vec<String>,
    pub goal: Vec<String>,
    pub actions: Vec<ActionDocument>,
    /// Facts forced public even if only one agent uses them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub public_facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDocument {
    pub agent: String,
    pub name: String,
    #[serde(default)]
    pub pre: Vec<String>,
    #[serde(default)]
    pub add: Vec<String>,
    #[serde(default)]
    pub del: Vec<String>,
    #[serde(default = "default_cost")]
    pub cost: f64,
}

pub fn parse_document(bytes: &[u8]) -> Result<TaskDocument, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IoError::Utf8(e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| IoError::Schema { path: e.path().to_string(), message: e.inner().to_string() })
}

pub fn parse_task(bytes: &[u8]) -> Result<Problem, IoError> {
    document_to_problem(&parse_document(bytes)?)
}

/// Intern facts in lexicographic order and classify privacy.
pub fn document_to_problem(doc: &TaskDocument) -> Result<Problem, IoError> {
    let mut names: Vec<&str> = doc.facts.iter().map(String::as_str).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(IoError::DuplicateFact(w[0].to_string()));
    }
    let ids: HashMap<&str, FactId> = names.iter().enumerate().map(|(i, n)| (*n, FactId(i as u32))).collect();
    let lookup = |list: &[String], context: &str| -> Result<Vec<FactId>, IoError> {
        let set: BTreeSet<FactId> = list
            .iter()
            .map(|f| {
                ids.get(f.as_str())
                    .copied()
                    .ok_or_else(|| IoError::UndeclaredFact { fact: f.clone(), context: context.to_string() })
            })
            .collect::<Result<_, _>>()?;
        Ok(set.into_iter().collect())
    };
    let agent_ids: HashMap<&str, AgentId> =
        doc.agents.iter().enumerate().map(|(i, a)| (a.as_str(), AgentId(i))).collect();
    if agent_ids.len() != doc.agents.len() {
        return Err(IoError::DuplicateAgent);
    }
    let mut actions = Vec::with_capacity(doc.actions.len());
    for a in &doc.actions {
        let agent = *agent_ids
            .get(a.agent.as_str())
            .ok_or_else(|| IoError::UndeclaredAgent { agent: a.agent.clone(), action: a.name.clone() })?;
        let ctx = |part: &str| format!("{} of action `{}`", part, a.name);
        actions.push(RawAction {
            name: a.name.clone(),
            agent,
            pre: lookup(&a.pre, &ctx("pre"))?,
            add: lookup(&a.add, &ctx("add"))?,
            del: lookup(&a.del, &ctx("del"))?,
            cost: a.cost,
        });
    }
    let raw = RawProblem {
        name: doc.name.clone(),
        agents: doc.agents.clone(),
        facts: names.iter().map(|s| s.to_string()).collect(),
        actions,
        init: lookup(&doc.init, "init")?,
        goals: lookup(&doc.goal, "goal")?,
        declared_public: lookup(&doc.public_facts, "public_facts")?,
    };
    Ok(classify_facts(raw)?)
}

pub fn problem_to_document(p: &Problem) -> TaskDocument {
    let raw = p.to_raw();
    let name = |f: &FactId| raw.facts[f.index()].clone();
    let names = |fs: &[FactId]| fs.iter().map(name).collect::<Vec<_>>();
    TaskDocument {
        name: raw.name.clone(),
        agents: raw.agents.clone(),
        facts: raw.facts.clone(),
        init: names(&raw.init),
        goal: names(&raw.goals),
        actions: raw
            .actions
            .iter()
            .map(|a| ActionDocument {
                agent: raw.agents[a.agent.index()].clone(),
                name: a.name.clone(),
                pre: names(&a.pre),
                add: names(&a.add),
                del: names(&a.del),
                cost: a.cost,
            })
            .collect(),
        public_facts: names(&raw.declared_public),
    }
}

/// Pretty JSON with sorted keys.
pub fn document_to_json(doc: &TaskDocument) -> Vec<u8> {
    let value = serde_json::to_value(doc).expect("task documents serialize");
    let mut out = serde_json::to_vec_pretty(&value).expect("json values serialize");
    out.push(b'\n');
    out
}

pub fn serialize_task(p: &Problem) -> Vec<u8> {
    document_to_json(&problem_to_document(p))
}
