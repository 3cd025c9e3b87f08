use std::collections::BTreeMap;
use std::time::Duration;

use maplanner::filter::AgentStatus;
use maplanner::model::{AgentId, Token};
use maplanner::net::*;

fn id(agent: usize, seq: u64) -> MsgId {
    MsgId { agent: AgentId(agent), seq }
}

fn sample_envelopes() -> Vec<Envelope> {
    let trace = TraceId { agent: AgentId(1), serial: 4 };
    let hop = TraceHop {
        agent: AgentId(0),
        key: SegmentKey { trace, from_msg: Some(id(2, 9)) },
        public_actions: vec!["unload".into()],
    };
    let payloads = vec![
        Payload::State(StatePayload {
            public_facts: vec![0, 3],
            tokens: BTreeMap::from([(AgentId(1), Token([7; 32])), (AgentId(2), Token([9; 32]))]),
            goal_flags: vec![true, false, true],
            g: 2.5,
            depth: 3,
        }),
        Payload::Status(StatusPayload::Hello { token: Token([1; 32]), goal_flag: false }),
        Payload::Status(StatusPayload::Report(StatusReport {
            status: AgentStatus::PartiallyEmpty,
            state_sent: 4,
            state_received: 2,
            withheld: 1,
            round: Some(3),
        })),
        Payload::Status(StatusPayload::Probe { round: 3 }),
        Payload::Terminate(TerminatePayload::GoalFound { trace }),
        Payload::Terminate(TerminatePayload::PlanReady { trace, hops: vec![hop.clone()] }),
        Payload::Terminate(TerminatePayload::TraceFailed { trace, reason: "gone".into() }),
        Payload::Terminate(TerminatePayload::Shutdown { reason: ShutdownReason::Solved, winner: Some(trace) }),
        Payload::TraceReq(TraceRequest { trace, target: id(2, 9), hops: vec![hop.clone()] }),
        Payload::TraceRep(TraceReply { trace, result: TraceResult::Complete(vec![hop]) }),
        Payload::TraceRep(TraceReply { trace, result: TraceResult::Failed("x".into()) }),
    ];
    payloads
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut e = Envelope::new(
                id(1, i as u64),
                if i % 2 == 0 { Recipient::All } else { Recipient::Agent(AgentId(0)) },
                p,
            );
            e.enqueue_us = 10;
            e.deliver_us = 15;
            e
        })
        .collect()
}

#[test]
fn every_kind_survives_framing() {
    for env in sample_envelopes() {
        let bytes = frame(&env).unwrap();
        assert_eq!(unframe(&bytes).unwrap(), env, "{:?}", env.kind());
        let mut cursor = std::io::Cursor::new(bytes);
        assert_eq!(frame::read_frame(&mut cursor).unwrap(), Some(env));
        assert_eq!(frame::read_frame(&mut cursor).unwrap(), None);
    }
}

#[test]
fn frame_json_keys_are_sorted() {
    let env = &sample_envelopes()[0];
    let body = frame::to_sorted_json(env).unwrap();
    let text = String::from_utf8(body).unwrap();
    let keys = ["\"deliver_us\"", "\"enqueue_us\"", "\"id\"", "\"kind\"", "\"payload\"", "\"recipient\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
}

#[test]
fn malformed_frames_are_rejected() {
    assert!(matches!(unframe(&[0, 0, 0, 0]), Err(FrameError::Empty)));
    assert!(matches!(unframe(&[0, 0]), Err(FrameError::Truncated { .. })));
    assert!(matches!(unframe(&[0, 0, 0, 5, b'{']), Err(FrameError::Truncated { expected: 5, got: 1 })));
    assert!(matches!(unframe(&[0, 0, 0, 2, b'{', b'}']), Err(FrameError::Json(_))));
    let huge = ((frame::MAX_FRAME + 1) as u32).to_be_bytes();
    assert!(matches!(frame::read_frame(&mut &huge[..]), Err(FrameError::TooLarge(_))));
    assert!(matches!(frame::read_frame(&mut &[0u8, 0, 1][..]), Err(FrameError::Truncated { expected: 4, got: 3 })));
}

#[test]
fn socket_mesh_round_trip_and_fifo() {
    let mut mesh = socket_mesh(3, &DelayModel::from_ms(2.0, 0.5, 11)).unwrap();
    let envs = sample_envelopes();
    for (i, e) in envs.iter().enumerate() {
        let mut e = e.clone();
        e.id = id(1, i as u64);
        mesh[1].send(e).unwrap();
    }
    let mut got0 = Vec::new();
    let mut got2 = Vec::new();
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    while (got0.len() < envs.len() || got2.len() < envs.len().div_ceil(2)) && std::time::Instant::now() < deadline {
        if let Some(e) = mesh[0].recv_timeout(Duration::from_millis(5)).unwrap() {
            got0.push(e);
        }
        if let Some(e) = mesh[2].recv_timeout(Duration::from_millis(5)).unwrap() {
            got2.push(e);
        }
    }
    // agent 0 is addressed by every envelope, agent 2 only by broadcasts
    assert_eq!(got0.len(), envs.len());
    assert_eq!(got2.len(), envs.len().div_ceil(2));
    let seqs: Vec<u64> = got0.iter().map(|e| e.id.seq).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "channel reordered: {seqs:?}");
    for (e, orig) in got0.iter().zip(&envs) {
        assert_eq!(e.payload, orig.payload);
        assert!(e.deliver_us >= e.enqueue_us);
    }
    assert_eq!(mesh[1].stats().sent, (envs.len() + envs.len().div_ceil(2)) as u64);
    assert!(mesh.iter().all(|m| m.errors().is_empty()));
}

#[test]
fn socket_send_to_departed_peer_is_tolerated() {
    let mut mesh = socket_mesh(2, &DelayModel::from_ms(0.0, 0.1, 1)).unwrap();
    let gone = mesh.pop().unwrap();
    drop(gone);
    std::thread::sleep(Duration::from_millis(20));
    let env = sample_envelopes().remove(0);
    for _ in 0..50 {
        mesh[0].send(env.clone()).ok();
    }
}
