//! Shared helpers for integration tests: fixture loading and a centralized
//! breadth-first oracle over the unencrypted global state space.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use maplanner::engine::{run_simulation, EngineConfig, SystemOutcome};
use maplanner::filter::FilterPolicy;
use maplanner::io::parse_task;
use maplanner::model::Problem;
use maplanner::net::{DelayModel, DelaySampler};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn load(path: &Path) -> Arc<Problem> {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Arc::new(parse_task(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
}

pub fn fixture(rel: &str) -> Arc<Problem> {
    load(&fixtures_dir().join(rel))
}

/// Every task JSON in a fixture subdirectory, sorted by file name.
pub fn fixture_set(sub: &str) -> Vec<(String, Arc<Problem>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".classes.json"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), load(&p))).collect()
}

pub fn mini_suite() -> Vec<(String, Arc<Problem>)> {
    fixture_set("suite")
}

type Global = Vec<bool>;

fn initial(p: &Problem) -> Global {
    let mut s = vec![false; p.facts().len()];
    for f in p.init() {
        s[f.index()] = true;
    }
    s
}

fn successors<'a>(p: &'a Problem, s: &'a Global) -> impl Iterator<Item = Global> + 'a {
    p.actions().iter().filter(|a| a.pre.iter().all(|f| s[f.index()])).map(move |a| {
        let mut t = s.clone();
        for f in &a.del {
            t[f.index()] = false;
        }
        for f in &a.add {
            t[f.index()] = true;
        }
        t
    })
}

fn is_goal(p: &Problem, s: &Global) -> bool {
    p.goals().iter().all(|f| s[f.index()])
}

/// Shortest plan length by breadth-first search over global states, or
/// `None` when no goal state is reachable.
pub fn oracle_plan_length(p: &Problem) -> Option<usize> {
    let start = initial(p);
    let mut seen: HashSet<Global> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if is_goal(p, &s) {
            return Some(d);
        }
        for t in successors(p, &s) {
            if seen.insert(t.clone()) {
                queue.push_back((t, d + 1));
            }
        }
    }
    None
}

pub fn oracle_solvable(p: &Problem) -> bool {
    oracle_plan_length(p).is_some()
}

/// Distinct public projections (as sorted public indices) over all reachable
/// global states.
pub fn reachable_public_projections(p: &Problem) -> BTreeSet<Vec<u32>> {
    let start = initial(p);
    let mut seen: HashSet<Global> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut out = BTreeSet::new();
    while let Some(s) = queue.pop_front() {
        let proj: Vec<u32> = p
            .public_facts()
            .iter()
            .filter(|f| s[f.index()])
            .map(|f| p.public_index(*f).expect("public fact has an index"))
            .collect();
        out.insert(proj);
        for t in successors(p, &s) {
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    out
}

/// SIM-mode run with gamma delays of the given mean.
pub fn simulate(p: &Arc<Problem>, policy: FilterPolicy, seed: u64, mean_ms: f64) -> SystemOutcome {
    let cfg = EngineConfig { policy, seed, ..EngineConfig::default() };
    let sampler = DelaySampler::new(&DelayModel::from_ms(mean_ms, 0.10, seed)).unwrap();
    run_simulation(p.clone(), &cfg, Box::new(sampler))
}
