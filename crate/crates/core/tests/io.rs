mod common;

use common::*;
use maplanner::io::{document_to_json, import_pddl, parse_document, parse_task, serialize_task, IoError};
use maplanner::model::{validate_plan, PlanStep};
use proptest::prelude::*;

fn pddl(name: &str) -> Vec<u8> {
    std::fs::read(fixtures_dir().join("pddl").join(name)).unwrap()
}

#[test]
fn blocksworld_import_matches_golden() {
    let doc = import_pddl(&pddl("blocksworld-domain.pddl"), &pddl("blocksworld-problem.pddl"), "robot").unwrap();
    let golden = pddl("blocksworld.golden.json");
    assert_eq!(document_to_json(&doc), golden);
    assert_eq!(parse_document(&golden).unwrap(), doc);
}

#[test]
fn blocksworld_hand_checked_plan_validates() {
    let p = parse_task(&pddl("blocksworld.golden.json")).unwrap();
    let step = |agent: &str, action: &str| PlanStep { agent: agent.into(), action: action.into() };
    let plan = vec![
        step("left", "unstack(left,c,a)"),
        step("left", "putdown(left,c)"),
        step("right", "pickup(right,b)"),
        step("right", "stack(right,b,c)"),
        step("left", "pickup(left,a)"),
        step("left", "stack(left,a,b)"),
    ];
    let v = validate_plan(&p, &plan);
    assert!(v.valid, "{:?}", v.failure);
    assert_eq!(v.cost, 6.0);
    // each arm's hand state is private; block facts are shared
    let table = p.classification_table();
    assert_eq!(table["holding(left,a)"], "left");
    assert_eq!(table["handempty(right)"], "right");
    assert_eq!(table["on(a,b)"], "public");
}

#[test]
fn unsupported_construct_names_line() {
    let domain = String::from_utf8(pddl("blocksworld-domain.pddl"))
        .unwrap()
        .replace(":precondition (holding ?r ?x)", ":precondition (or (holding ?r ?x) (clear ?x))");
    match import_pddl(domain.as_bytes(), &pddl("blocksworld-problem.pddl"), "robot") {
        Err(IoError::Unsupported { construct, line }) => {
            assert_eq!(construct, "or");
            assert_eq!(line, 19);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_agent_type_is_an_error() {
    assert!(import_pddl(&pddl("blocksworld-domain.pddl"), &pddl("blocksworld-problem.pddl"), "gripper").is_err());
}

#[test]
fn every_fixture_round_trips() {
    for sub in ["suite", "special", "logistics"] {
        for (name, p) in fixture_set(sub) {
            let bytes = serialize_task(&p);
            let back = parse_task(&bytes).unwrap();
            assert_eq!(*p, back, "{name}");
            assert_eq!(serialize_task(&back), bytes, "{name}");
        }
    }
}

fn fact_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

prop_compose! {
    fn arb_document()(facts in prop::collection::btree_set(fact_name(), 1..8), agents in 1usize..4, seed in any::<u64>())
        -> maplanner::io::TaskDocument {
        let facts: Vec<String> = facts.into_iter().collect();
        let agent_names: Vec<String> = (0..agents).map(|i| format!("ag{i}")).collect();
        let pick = |k: u64| facts[(k % facts.len() as u64) as usize].clone();
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); s >> 33 };
        let actions = (0..(next() % 6 + 1))
            .map(|i| {
                let add = pick(next());
                let del = pick(next());
                maplanner::io::ActionDocument {
                    agent: agent_names[(next() % agents as u64) as usize].clone(),
                    name: format!("act{i}"),
                    pre: vec![pick(next())],
                    del: if del != add && next() % 2 == 0 { vec![del] } else { vec![] },
                    add: vec![add],
                    cost: (next() % 4) as f64,
                }
            })
            .collect();
        maplanner::io::TaskDocument {
            name: "gen".into(),
            agents: agent_names.clone(),
            init: vec![pick(next())],
            goal: vec![pick(next())],
            facts,
            actions,
            public_facts: vec![],
        }
    }
}

proptest! {
    #[test]
    fn serialization_round_trips(doc in arb_document()) {
        let p = maplanner::io::document_to_problem(&doc).unwrap();
        let bytes = serialize_task(&p);
        prop_assert_eq!(&parse_task(&bytes).unwrap(), &p);
        prop_assert_eq!(serialize_task(&parse_task(&bytes).unwrap()), bytes);
    }
}
