//! Grounded multi-agent STRIPS tasks: facts, actions, fact privacy, agent
//! views, state transitions and plan validation.

mod plan;
mod problem;
mod state;

use thiserror::Error;

pub use plan::{validate_plan, JointPlan, PlanFailure, PlanStep, PlanValidation};
pub use problem::{
    classify_facts, Action, ActionId, AgentId, ClassificationWarning, Fact, FactId, Owner, Problem, RawAction,
    RawProblem, Visibility,
};
pub use state::{local_applicable, AgentView, LocalAction, PublicProjection, State, Token};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("problem has no agents")]
    NoAgents,
    #[error("duplicate fact `{0}`")]
    DuplicateFact(String),
    #[error("duplicate action `{0}`")]
    DuplicateAction(String),
    #[error("fact id {id} out of range in {context}")]
    UnknownFactId { id: u32, context: String },
    #[error("agent id {id} out of range in action `{action}`")]
    UnknownAgentId { id: usize, action: String },
    #[error("action `{action}` has invalid cost {cost}")]
    InvalidCost { action: String, cost: f64 },
    #[error("action `{action}` both adds and deletes `{fact}`")]
    AddDeleteOverlap { action: String, fact: String },
    #[error("private fact `{fact}` mentioned by foreign action `{action}`")]
    PrivacyViolation { fact: String, action: String },
}
