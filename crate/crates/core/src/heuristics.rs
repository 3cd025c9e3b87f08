//! Evaluation functions used to order the open list: unachieved-goal count,
//! the relaxed-plan fact counter `#r`, and path depth.

use fixedbitset::FixedBitSet;

use crate::model::{AgentId, AgentView, Problem, State};

/// Which goals an agent counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalView {
    /// Public goals, the agent's own private goals, and one unit per other
    /// agent whose private-goal flag is unset.
    Full,
    /// Public goals only.
    PublicOnly,
}

/// Number of goals in the view that do not hold in `state`.
pub fn goal_count(view: &AgentView, state: &State, goals: GoalView) -> u32 {
    let unmet = |gs: &[u32]| gs.iter().filter(|g| !state.local.contains(**g as usize)).count() as u32;
    let public = unmet(view.public_goals());
    match goals {
        GoalView::PublicOnly => public,
        GoalView::Full => {
            let foreign =
                state.goal_flags.iter().enumerate().filter(|(a, flag)| *a != view.agent().index() && !**flag).count()
                    as u32;
            public + unmet(view.private_goals()) + foreign
        }
    }
}

/// Upper bound of [`goal_count`] for a view.
pub fn goal_view_size(view: &AgentView, goals: GoalView) -> u32 {
    match goals {
        GoalView::PublicOnly => view.public_goals().len() as u32,
        GoalView::Full => (view.public_goals().len() + view.private_goals().len() + view.num_agents() - 1) as u32,
    }
}

/// Facts added by a delete-relaxed plan computed once from the initial state
/// with one agent's own actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxedPlanSet {
    facts: FixedBitSet,
}

impl RelaxedPlanSet {
    pub fn empty(num_known: usize) -> Self {
        RelaxedPlanSet { facts: FixedBitSet::with_capacity(num_known) }
    }

    /// Local fact indices in the set.
    pub fn facts(&self) -> &FixedBitSet {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_clear()
    }

    /// h_add layer costs from the initial state, then greedy backward
    /// extraction from the reachable known goals. Supporters are the
    /// cheapest achievers, ties broken by lowest action index.
    pub fn extract(problem: &Problem, view: &AgentView) -> Self {
        let n = view.num_known();
        let init = view.local_set(problem.init());
        let mut cost = vec![f64::INFINITY; n];
        for i in init.ones() {
            cost[i] = 0.0;
        }
        let pre_cost = |cost: &[f64], pre: &[u32]| -> f64 { pre.iter().map(|p| cost[*p as usize]).sum() };
        loop {
            let mut changed = false;
            for a in view.actions() {
                let c = pre_cost(&cost, &a.pre);
                if !c.is_finite() {
                    continue;
                }
                let c = c + a.cost;
                for x in &a.add {
                    if c < cost[*x as usize] {
                        cost[*x as usize] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut supporter: Vec<Option<usize>> = vec![None; n];
        let mut best = vec![f64::INFINITY; n];
        for (slot, a) in view.actions().iter().enumerate() {
            let c = pre_cost(&cost, &a.pre) + a.cost;
            if !c.is_finite() {
                continue;
            }
            for x in &a.add {
                if c < best[*x as usize] {
                    best[*x as usize] = c;
                    supporter[*x as usize] = Some(slot);
                }
            }
        }

        let mut facts = FixedBitSet::with_capacity(n);
        let mut marked = FixedBitSet::with_capacity(n);
        let mut used = vec![false; view.actions().len()];
        let mut stack: Vec<u32> = view
            .public_goals()
            .iter()
            .chain(view.private_goals())
            .copied()
            .filter(|g| cost[*g as usize].is_finite() && !init.contains(*g as usize))
            .collect();
        stack.sort_unstable();
        stack.reverse();
        for g in &stack {
            marked.insert(*g as usize);
        }
        while let Some(f) = stack.pop() {
            let Some(slot) = supporter[f as usize] else { continue };
            if used[slot] {
                continue;
            }
            used[slot] = true;
            let a = &view.actions()[slot];
            for x in &a.add {
                facts.insert(*x as usize);
            }
            for p in a.pre.iter().rev() {
                let p = *p as usize;
                if !init.contains(p) && !marked.contains(p) {
                    marked.insert(p);
                    stack.push(p as u32);
                }
            }
        }
        RelaxedPlanSet { facts }
    }
}

/// Relaxed-plan set for `agent`, built from its own actions only.
pub fn extract_relaxed_plan(problem: &Problem, agent: AgentId) -> RelaxedPlanSet {
    RelaxedPlanSet::extract(problem, &AgentView::new(problem, agent))
}

/// Per-node counters accumulated along a search path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCounters {
    /// Relaxed-plan facts made true somewhere on the path.
    pub achieved_r: FixedBitSet,
    /// Number of actions on the path.
    pub depth: u32,
    /// Number of public actions on the path.
    pub public_depth: u32,
}

impl PathCounters {
    /// Counters for a path that starts at `state`: root states, and states
    /// received from other agents (whose paths are not reconstructible).
    pub fn restart(state: &State, r: &RelaxedPlanSet, depth: u32, public_depth: u32) -> Self {
        let mut achieved_r = r.facts.clone();
        achieved_r.intersect_with(&state.local);
        PathCounters { achieved_r, depth, public_depth }
    }

    /// `#r`: how many relaxed-plan facts were achieved on the way here.
    pub fn r_count(&self) -> u32 {
        self.achieved_r.count_ones(..) as u32
    }
}

/// Counters of a child generated from a node with `parent` counters.
pub fn update_counters(parent: &PathCounters, child: &State, r: &RelaxedPlanSet, public_action: bool) -> PathCounters {
    let mut achieved_r = r.facts.clone();
    achieved_r.intersect_with(&child.local);
    achieved_r.union_with(&parent.achieved_r);
    PathCounters { achieved_r, depth: parent.depth + 1, public_depth: parent.public_depth + public_action as u32 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classify_facts, ActionId, FactId, RawAction, RawProblem, Token};

    fn act(name: &str, pre: &[u32], add: &[u32], del: &[u32]) -> RawAction {
        RawAction {
            name: name.into(),
            agent: AgentId(0),
            pre: pre.iter().map(|&i| FactId(i)).collect(),
            add: add.iter().map(|&i| FactId(i)).collect(),
            del: del.iter().map(|&i| FactId(i)).collect(),
            cost: 1.0,
        }
    }

    fn single(facts: &[&str], actions: Vec<RawAction>, init: &[u32], goals: &[u32]) -> Problem {
        classify_facts(RawProblem {
            name: "h".into(),
            agents: vec!["solo".into()],
            facts: facts.iter().map(|s| s.to_string()).collect(),
            actions,
            init: init.iter().map(|&i| FactId(i)).collect(),
            goals: goals.iter().map(|&i| FactId(i)).collect(),
            declared_public: vec![],
        })
        .unwrap()
    }

    fn local_names(p: &Problem, v: &AgentView, set: &FixedBitSet) -> Vec<String> {
        set.ones().map(|l| p.fact(v.known_fact(l as u32)).name.clone()).collect()
    }

    #[test]
    fn goal_in_init_gives_empty_plan() {
        let p = single(&["g"], vec![act("a", &[], &[0], &[])], &[0], &[0]);
        assert!(extract_relaxed_plan(&p, AgentId(0)).is_empty());
    }

    #[test]
    fn single_achiever() {
        let p = single(&["g", "s"], vec![act("a", &[1], &[0], &[])], &[1], &[0]);
        let v = AgentView::new(&p, AgentId(0));
        let r = RelaxedPlanSet::extract(&p, &v);
        assert_eq!(local_names(&p, &v, r.facts()), vec!["g"]);
    }

    #[test]
    fn chain_collects_all_adds() {
        // s0 -a-> s1 -b-> s2 -c-> g, plus a distractor achieving x
        let p = single(
            &["g", "s0", "s1", "s2", "x"],
            vec![
                act("a", &[1], &[2], &[1]),
                act("b", &[2], &[3], &[2]),
                act("c", &[3], &[0], &[3]),
                act("d", &[1], &[4], &[]),
            ],
            &[1],
            &[0],
        );
        let v = AgentView::new(&p, AgentId(0));
        let r = RelaxedPlanSet::extract(&p, &v);
        assert_eq!(local_names(&p, &v, r.facts()), vec!["g", "s1", "s2"]);
    }

    #[test]
    fn unreachable_goal_gives_empty_set() {
        let p = single(&["g", "s"], vec![act("a", &[0], &[1], &[])], &[], &[0]);
        assert!(extract_relaxed_plan(&p, AgentId(0)).is_empty());
    }

    #[test]
    fn cheapest_supporter_wins_ties_by_index() {
        // two achievers of g with equal cost: lower index is chosen
        let p = single(&["g", "s", "t"], vec![act("b", &[1], &[0, 2], &[]), act("a", &[1], &[0], &[])], &[1], &[0]);
        let v = AgentView::new(&p, AgentId(0));
        let r = RelaxedPlanSet::extract(&p, &v);
        assert_eq!(local_names(&p, &v, r.facts()), vec!["g", "t"]);
    }

    #[test]
    fn goal_counts() {
        let p = single(&["a", "b", "c"], vec![act("x", &[], &[0, 1, 2], &[])], &[0], &[0, 1, 2]);
        let v = AgentView::new(&p, AgentId(0));
        let s = v.initial_state(&p, vec![None], vec![true]);
        assert_eq!(goal_count(&v, &s, GoalView::Full), 2);
        let t = v.apply(ActionId(0), &s);
        assert_eq!(goal_count(&v, &t, GoalView::Full), 0);
    }

    #[test]
    fn foreign_flags_count_as_unmet() {
        let p = classify_facts(RawProblem {
            name: "f".into(),
            agents: vec!["a".into(), "b".into(), "c".into()],
            facts: vec!["g".into()],
            actions: vec![
                RawAction {
                    name: "x".into(),
                    agent: AgentId(0),
                    pre: vec![],
                    add: vec![FactId(0)],
                    del: vec![],
                    cost: 1.0,
                },
                RawAction {
                    name: "y".into(),
                    agent: AgentId(1),
                    pre: vec![FactId(0)],
                    add: vec![],
                    del: vec![],
                    cost: 1.0,
                },
            ],
            init: vec![],
            goals: vec![FactId(0)],
            declared_public: vec![],
        })
        .unwrap();
        let v = AgentView::new(&p, AgentId(0));
        let tok = Some(Token([0; 32]));
        let s = v.initial_state(&p, vec![None, tok, tok], vec![true, false, true]);
        assert_eq!(goal_count(&v, &s, GoalView::Full), 2);
        assert_eq!(goal_count(&v, &s, GoalView::PublicOnly), 1);
        assert!(goal_count(&v, &s, GoalView::Full) <= goal_view_size(&v, GoalView::Full));
    }

    #[test]
    fn counters_follow_path() {
        let p = single(
            &["g", "s0", "s1", "s2", "x"],
            vec![
                act("a", &[1], &[2], &[1]),
                act("b", &[2], &[3], &[2]),
                act("d", &[3], &[4], &[]),
                act("c", &[3], &[0], &[3]),
            ],
            &[1],
            &[0],
        );
        let v = AgentView::new(&p, AgentId(0));
        let r = RelaxedPlanSet::extract(&p, &v);
        let s0 = v.initial_state(&p, vec![None], vec![true]);
        let mut c = PathCounters::restart(&s0, &r, 0, 0);
        let mut seq = vec![c.r_count()];
        let mut s = s0;
        for a in [0, 1, 2, 3] {
            s = v.apply(ActionId(a), &s);
            c = update_counters(&c, &s, &r, false);
            seq.push(c.r_count());
        }
        // R = {s1, s2, g}: s1 then s2 then distractor then g
        assert_eq!(seq, vec![0, 1, 2, 2, 3]);
        assert_eq!(c.depth, 4);
    }

    #[test]
    fn empty_relaxed_plan_keeps_zero() {
        let p = single(&["g", "s"], vec![act("a", &[1], &[0], &[1])], &[1, 0], &[0]);
        let v = AgentView::new(&p, AgentId(0));
        let r = RelaxedPlanSet::extract(&p, &v);
        assert!(r.is_empty());
        let s = v.initial_state(&p, vec![None], vec![true]);
        let c = update_counters(&PathCounters::restart(&s, &r, 0, 0), &v.apply(ActionId(0), &s), &r, false);
        assert_eq!(c.r_count(), 0);
    }
}
