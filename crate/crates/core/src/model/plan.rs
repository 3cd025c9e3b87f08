use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::problem::Problem;

/// One step of a joint plan: the acting agent's name and the action name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub agent: String,
    pub action: String,
}

pub type JointPlan = Vec<PlanStep>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanFailure {
    UnknownAction { index: usize, action: String },
    WrongAgent { index: usize, action: String, agent: String },
    NotApplicable { index: usize, action: String },
    GoalsUnmet { missing: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanValidation {
    pub valid: bool,
    pub cost: f64,
    pub failure: Option<PlanFailure>,
}

/// Replay a joint plan on the global, unencrypted state from the initial
/// facts and check that every goal holds at the end.
pub fn validate_plan(problem: &Problem, plan: &[PlanStep]) -> PlanValidation {
    let fail = |cost, failure| PlanValidation { valid: false, cost, failure: Some(failure) };
    let mut state = FixedBitSet::with_capacity(problem.facts().len());
    for f in problem.init() {
        state.insert(f.index());
    }
    let mut cost = 0.0;
    for (index, step) in plan.iter().enumerate() {
        let Some(a) = problem.action_by_name(&step.action) else {
            return fail(cost, PlanFailure::UnknownAction { index, action: step.action.clone() });
        };
        if problem.agents()[a.agent.index()] != step.agent {
            return fail(
                cost,
                PlanFailure::WrongAgent { index, action: step.action.clone(), agent: step.agent.clone() },
            );
        }
        if !a.pre.iter().all(|p| state.contains(p.index())) {
            return fail(cost, PlanFailure::NotApplicable { index, action: step.action.clone() });
        }
        for d in &a.del {
            state.set(d.index(), false);
        }
        for x in &a.add {
            state.insert(x.index());
        }
        cost += a.cost;
    }
    let missing: Vec<String> =
        problem.goals().iter().filter(|g| !state.contains(g.index())).map(|g| problem.fact(*g).name.clone()).collect();
    if !missing.is_empty() {
        return fail(cost, PlanFailure::GoalsUnmet { missing });
    }
    PlanValidation { valid: true, cost, failure: None }
}
