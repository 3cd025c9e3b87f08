use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{HarnessError, ProblemRecord, ScoreBoard};

/// `C*/C`; zero when unsolved. A zero-cost plan against a zero best cost
/// scores 1.
pub fn quality_score(cost: Option<f64>, best: f64) -> f64 {
    match cost {
        None => 0.0,
        Some(c) if c <= 0.0 => 1.0,
        Some(c) => best / c,
    }
}

/// 1 when `t <= max(best, 1 s)`, else `1/(1 + log10(t/best))`; zero when
/// unsolved. Times in milliseconds.
pub fn time_score(time_ms: Option<f64>, best_ms: f64) -> f64 {
    match time_ms {
        None => 0.0,
        Some(t) if t <= best_ms.max(1000.0) => 1.0,
        Some(t) => 1.0 / (1.0 + (t / best_ms).log10()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config: String,
    pub quality: f64,
    pub time: f64,
    /// Problem name to (quality, time).
    pub per_problem: BTreeMap<String, (f64, f64)>,
}

fn shared_problems(boards: &[ScoreBoard]) -> Result<BTreeSet<String>, HarnessError> {
    if boards.len() < 2 {
        return Err(HarnessError::TooFewConfigs);
    }
    let names = |b: &ScoreBoard| b.problems.iter().map(|p| p.problem.clone()).collect::<BTreeSet<_>>();
    let shared = boards[1..].iter().fold(names(&boards[0]), |acc, b| acc.intersection(&names(b)).cloned().collect());
    if shared.is_empty() {
        return Err(HarnessError::DisjointProblems);
    }
    Ok(shared)
}

fn record<'a>(b: &'a ScoreBoard, name: &str) -> &'a ProblemRecord {
    b.problems.iter().find(|p| p.problem == name).expect("shared problem")
}

/// Per-configuration sums of quality and time scores over the problems all
/// boards contain.
pub fn ipc_scores(boards: &[ScoreBoard]) -> Result<Vec<ConfigScore>, HarnessError> {
    let shared = shared_problems(boards)?;
    let mut out: Vec<ConfigScore> = boards
        .iter()
        .map(|b| ConfigScore { config: b.config.label.clone(), quality: 0.0, time: 0.0, per_problem: BTreeMap::new() })
        .collect();
    for name in &shared {
        let recs: Vec<&ProblemRecord> = boards.iter().map(|b| record(b, name)).collect();
        let best_cost = recs.iter().filter(|r| r.solved).filter_map(|r| r.cost).fold(f64::INFINITY, f64::min);
        let best_time = recs.iter().filter(|r| r.solved).filter_map(|r| r.wall_ms).fold(f64::INFINITY, f64::min);
        for (score, r) in out.iter_mut().zip(&recs) {
            let (q, t) = if r.solved {
                (quality_score(r.cost, best_cost), time_score(r.wall_ms, best_time))
            } else {
                (0.0, 0.0)
            };
            score.quality += q;
            score.time += t;
            score.per_problem.insert(name.clone(), (q, t));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonAverages {
    pub config: String,
    pub problems: usize,
    pub avg_time_ms: Option<f64>,
    pub avg_cost: Option<f64>,
    pub k_messages: Option<f64>,
    pub k_states: Option<f64>,
}

/// Averages restricted to the problems every board solved.
pub fn common_averages(boards: &[ScoreBoard]) -> Result<Vec<CommonAverages>, HarnessError> {
    let shared = shared_problems(boards)?;
    let common: Vec<&String> = shared.iter().filter(|n| boards.iter().all(|b| record(b, n).solved)).collect();
    let avg = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    Ok(boards
        .iter()
        .map(|b| {
            let recs: Vec<&ProblemRecord> = common.iter().map(|n| record(b, n)).collect();
            CommonAverages {
                config: b.config.label.clone(),
                problems: recs.len(),
                avg_time_ms: avg(recs.iter().filter_map(|r| r.wall_ms).collect()),
                avg_cost: avg(recs.iter().filter_map(|r| r.cost).collect()),
                k_messages: avg(recs.iter().map(|r| r.sent_messages / 1000.0).collect()),
                k_states: avg(recs.iter().map(|r| r.expanded / 1000.0).collect()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_cases() {
        assert_eq!(quality_score(Some(5.0), 5.0), 1.0);
        assert_eq!(quality_score(Some(10.0), 5.0), 0.5);
        assert_eq!(quality_score(None, 5.0), 0.0);
    }

    #[test]
    fn time_cases() {
        assert_eq!(time_score(Some(2000.0), 2000.0), 1.0);
        assert_eq!(time_score(Some(20_000.0), 2000.0), 0.5);
        assert_eq!(time_score(Some(900.0), 10.0), 1.0);
        assert_eq!(time_score(None, 10.0), 0.0);
    }
}
