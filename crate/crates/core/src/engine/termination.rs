use crate::filter::AgentStatus;
use crate::model::AgentId;
use crate::net::StatusReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationStep {
    Continue,
    /// Quiescence observed; probe every agent with this round number.
    StartRound(u64),
    FailExhausted,
}

/// All agents report EMPTY and every state delivery sent was received.
pub fn quiescent(reports: &[Option<StatusReport>]) -> bool {
    let mut sent = 0;
    let mut received = 0;
    for r in reports {
        match r {
            Some(r) if r.status == AgentStatus::Empty => {
                sent += r.state_sent;
                received += r.state_received;
            }
            _ => return false,
        }
    }
    sent == received
}

#[derive(Debug, Clone)]
struct Round {
    id: u64,
    snapshot: Vec<StatusReport>,
    replies: Vec<Option<StatusReport>>,
}

fn same_counts(a: &StatusReport, b: &StatusReport) -> bool {
    (a.status, a.state_sent, a.state_received) == (b.status, b.state_sent, b.state_received)
}

/// Coordinator-side two-phase detector. A round starts from the latest
/// reports once they are quiescent; exhaustion is declared only if every
/// agent's probe reply equals its snapshot entry.
#[derive(Debug, Clone)]
pub struct TerminationDetector {
    latest: Vec<Option<StatusReport>>,
    next_round: u64,
    round: Option<Round>,
}

impl TerminationDetector {
    pub fn new(n: usize) -> Self {
        TerminationDetector { latest: vec![None; n], next_round: 1, round: None }
    }

    pub fn round_in_progress(&self) -> Option<u64> {
        self.round.as_ref().map(|r| r.id)
    }

    pub fn observe(&mut self, from: AgentId, report: StatusReport) -> TerminationStep {
        self.latest[from.index()] = Some(report);
        if let Some(round) = self.round.as_mut() {
            if report.round == Some(round.id) {
                round.replies[from.index()] = Some(report);
                if round.replies.iter().all(Option::is_some) {
                    let ok =
                        round.replies.iter().zip(&round.snapshot).all(|(r, s)| same_counts(r.as_ref().unwrap(), s));
                    if ok && quiescent(&round.replies) {
                        return TerminationStep::FailExhausted;
                    }
                    self.round = None;
                }
            } else if report.status != AgentStatus::Empty {
                self.round = None;
            }
        }
        if self.round.is_none() && quiescent(&self.latest) {
            let id = self.next_round;
            self.next_round += 1;
            let n = self.latest.len();
            self.round =
                Some(Round { id, snapshot: self.latest.iter().map(|r| r.unwrap()).collect(), replies: vec![None; n] });
            return TerminationStep::StartRound(id);
        }
        TerminationStep::Continue
    }
}

/// One-shot form of the detector: `Continue` unless `latest` is quiescent
/// and `confirmation` re-validates it entry by entry.
pub fn detect_global_termination(
    latest: &[Option<StatusReport>],
    confirmation: &[Option<StatusReport>],
) -> TerminationStep {
    let mut d = TerminationDetector::new(latest.len());
    let mut round = None;
    for (i, r) in latest.iter().enumerate() {
        if let Some(r) = r {
            if let TerminationStep::StartRound(id) = d.observe(AgentId(i), *r) {
                round = Some(id);
            }
        }
    }
    let Some(id) = round.or(d.round_in_progress()) else { return TerminationStep::Continue };
    let mut out = TerminationStep::Continue;
    for (i, r) in confirmation.iter().enumerate() {
        let Some(r) = r else { return TerminationStep::Continue };
        out = d.observe(AgentId(i), StatusReport { round: Some(id), ..*r });
        if out != TerminationStep::Continue {
            break;
        }
    }
    if out == TerminationStep::FailExhausted {
        out
    } else {
        TerminationStep::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AgentStatus::*;

    fn rep(status: AgentStatus, sent: u64, recv: u64) -> Option<StatusReport> {
        Some(StatusReport { status, state_sent: sent, state_received: recv, withheld: 0, round: None })
    }

    #[test]
    fn all_empty_and_confirmed() {
        let l = [rep(Empty, 2, 1), rep(Empty, 1, 2)];
        assert_eq!(detect_global_termination(&l, &l), TerminationStep::FailExhausted);
    }

    #[test]
    fn message_in_flight_continues() {
        let l = [rep(Empty, 2, 1), rep(Empty, 1, 1)];
        assert_eq!(detect_global_termination(&l, &l), TerminationStep::Continue);
    }

    #[test]
    fn flip_during_confirmation_continues() {
        let l = [rep(Empty, 0, 0), rep(Empty, 0, 0)];
        let c = [rep(Empty, 0, 0), rep(Active, 0, 0)];
        assert_eq!(detect_global_termination(&l, &c), TerminationStep::Continue);
    }

    #[test]
    fn counter_change_during_confirmation_continues() {
        let l = [rep(Empty, 1, 1), rep(Empty, 1, 1)];
        let c = [rep(Empty, 2, 1), rep(Empty, 1, 2)];
        assert_eq!(detect_global_termination(&l, &c), TerminationStep::Continue);
    }

    #[test]
    fn missing_report_continues() {
        let l = [rep(Empty, 0, 0), None];
        assert_eq!(detect_global_termination(&l, &l), TerminationStep::Continue);
    }

    #[test]
    fn detector_rounds() {
        let mut d = TerminationDetector::new(2);
        assert_eq!(d.observe(AgentId(0), rep(Empty, 0, 0).unwrap()), TerminationStep::Continue);
        assert_eq!(d.observe(AgentId(1), rep(Empty, 0, 0).unwrap()), TerminationStep::StartRound(1));
        // agent 1 wakes up before replying: round abandoned
        assert_eq!(d.observe(AgentId(1), rep(Active, 0, 1).unwrap()), TerminationStep::Continue);
        assert_eq!(d.round_in_progress(), None);
        assert_eq!(d.observe(AgentId(1), rep(Empty, 0, 1).unwrap()), TerminationStep::Continue);
        assert_eq!(d.observe(AgentId(0), rep(Empty, 1, 0).unwrap()), TerminationStep::StartRound(2));
        let reply = |s, r| StatusReport { round: Some(2), ..rep(Empty, s, r).unwrap() };
        assert_eq!(d.observe(AgentId(0), reply(1, 0)), TerminationStep::Continue);
        assert_eq!(d.observe(AgentId(1), reply(0, 1)), TerminationStep::FailExhausted);
    }
}
