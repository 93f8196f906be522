use dynqueue::dyngraph::{AdversaryKind, Round};
use dynqueue::engine::{
    run, Algorithm, EngineError, Event, Outcome, ScenarioConfig, Termination, Trace, World,
};
use dynqueue::protocol::{Message, SuccValue};
use dynqueue::verify::{extract_queue, tailless_spans, verify_all};
use dynqueue::workload::ScheduleKind;

fn cfg(
    n: usize,
    k: usize,
    alg: Algorithm,
    adv: AdversaryKind,
    sched: ScheduleKind,
) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(n, k, alg);
    c.adversary = adv;
    c.schedule = sched;
    c
}

/// Two nodes, node 1 issuing at round 0, traced by hand through one cycle.
const TWO_NODE_GOLDEN: &str = "\
# n=2 head=0 algorithm=alg1 T=1 policy=lex_smallest rounds=4 outcome=completed
round=0 kind=RequestInit node=1 payload=(0,1)
round=0 kind=Send node=0 payload=EMPTY
round=0 kind=Send node=1 payload=QUEUE(0,1)
round=0 kind=Recv node=0 payload=QUEUE(0,1)@1
round=1 kind=Send node=0 payload=QUEUE(0,1)
round=1 kind=Send node=1 payload=QUEUE(0,1)
round=1 kind=Recv node=0 payload=QUEUE(0,1)@1
round=1 kind=Recv node=1 payload=QUEUE(0,1)@0
round=1 kind=Enqueue node=0 payload=(0,1)
round=1 kind=Cancel node=0 payload=1
round=1 kind=SuccChange node=0 payload=BOT->1
round=2 kind=Send node=0 payload=CANCEL(1)
round=2 kind=Send node=1 payload=EMPTY
round=2 kind=Recv node=1 payload=CANCEL(1)@0
round=3 kind=Send node=0 payload=CANCEL(1)
round=3 kind=Send node=1 payload=CANCEL(1)
round=3 kind=Recv node=0 payload=CANCEL(1)@1
round=3 kind=Recv node=1 payload=CANCEL(1)@0
round=3 kind=SuccChange node=1 payload=INF->BOT
";

#[test]
fn two_node_cycle_matches_hand_trace() {
    let out = run(&cfg(
        2,
        1,
        Algorithm::Alg1,
        AdversaryKind::StaticComplete,
        ScheduleKind::Concurrent,
    ))
    .unwrap();
    assert_eq!(out.trace.to_text(), TWO_NODE_GOLDEN);
    assert_eq!(out.final_succ, vec![SuccValue::Node(1), SuccValue::Bottom]);
    let parsed = Trace::from_text(TWO_NODE_GOLDEN).unwrap();
    assert!(verify_all(&parsed, None, None).passed());
}

#[test]
fn single_sequential_request_takes_2n_rounds() {
    let out = run(&cfg(
        4,
        1,
        Algorithm::Alg1,
        AdversaryKind::StaticComplete,
        ScheduleKind::Sequential,
    ))
    .unwrap();
    assert_eq!(out.rounds(), 8);
    let enq: Vec<Round> = out
        .trace
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::Enqueue { .. }))
        .map(|e| e.round)
        .collect();
    assert_eq!(enq, vec![3]);
    assert_eq!(tailless_spans(&out.trace), vec![(3, 4)]);
}

#[test]
fn concurrent_three_requests_within_2nk() {
    for adv in [
        AdversaryKind::StaticComplete,
        AdversaryKind::ObliviousRandom { seed: 5 },
        AdversaryKind::AdaptiveLine,
    ] {
        let out = run(&cfg(4, 3, Algorithm::Alg1, adv, ScheduleKind::Concurrent)).unwrap();
        assert_eq!(out.outcome, Outcome::Completed);
        assert_eq!(out.rounds(), 24);
    }
}

#[test]
fn sequential_second_request_starts_at_next_cycle() {
    let out = run(&cfg(
        5,
        2,
        Algorithm::Alg1,
        AdversaryKind::AdaptiveLine,
        ScheduleKind::Sequential,
    ))
    .unwrap();
    let inits: Vec<Round> = out
        .trace
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::RequestInit { .. }))
        .map(|e| e.round)
        .collect();
    assert_eq!(inits, vec![0, 10]);
    assert_eq!(out.rounds(), 20);
}

#[test]
fn zero_requests_leave_head_alone() {
    let out = run(&cfg(
        6,
        0,
        Algorithm::Alg2,
        AdversaryKind::StaticComplete,
        ScheduleKind::Concurrent,
    ))
    .unwrap();
    assert_eq!(out.rounds(), 0);
    assert_eq!(extract_queue(&out.final_succ, 0).unwrap().nodes, vec![0]);
    assert!(tailless_spans(&out.trace).is_empty());
}

#[test]
fn idle_world_sends_only_empty() {
    let mut c = cfg(
        4,
        0,
        Algorithm::Alg1,
        AdversaryKind::ObliviousRandom { seed: 1 },
        ScheduleKind::Concurrent,
    );
    c.termination = Termination::IdleDetect;
    let mut w = World::new(c).unwrap();
    for _ in 0..3 {
        w.step_round().unwrap();
    }
    assert_eq!(w.round(), 3);
    assert!(w.trace().events.iter().all(|e| matches!(
        e.event,
        Event::Send {
            message: Message::Empty
        }
    )));
}

#[test]
fn norep_trap_never_enqueues() {
    let mut c = cfg(
        3,
        1,
        Algorithm::NoRep,
        AdversaryKind::Trap,
        ScheduleKind::Concurrent,
    );
    c.horizon = Some(500);
    let out = run(&c).unwrap();
    assert_eq!(out.outcome, Outcome::HorizonExceeded);
    assert!(!out
        .trace
        .events
        .iter()
        .any(|e| matches!(e.event, Event::Enqueue { .. })));
    assert!(matches!(
        out.require_completed(),
        Err(EngineError::HorizonExceeded { horizon: 500 })
    ));
}

fn terminate_rounds(trace: &Trace) -> Vec<Round> {
    trace
        .events
        .iter()
        .filter(|e| e.event == Event::Terminate)
        .map(|e| e.round)
        .collect()
}

#[test]
fn idle_detection_after_quiet_2n_rounds() {
    let mut c = cfg(
        3,
        1,
        Algorithm::Alg1,
        AdversaryKind::StaticComplete,
        ScheduleKind::Concurrent,
    );
    c.termination = Termination::IdleDetect;
    let out = run(&c).unwrap();
    assert_eq!(out.outcome, Outcome::Terminated);
    let rounds = terminate_rounds(&out.trace);
    // served at the end of round 5, quiet through rounds 6..=11
    assert_eq!(rounds[0], 11);
    assert!(rounds.iter().all(|r| *r <= 11 + 3));
    assert_eq!(rounds.len(), 3);
    assert!(verify_all(&out.trace, Some(&out.graphs), None).passed());
}

#[test]
fn terminate_floods_within_n_rounds_on_a_line() {
    for n in [4usize, 7, 10] {
        let mut c = cfg(
            n,
            n - 1,
            Algorithm::Alg1,
            AdversaryKind::AdaptiveLine,
            ScheduleKind::Concurrent,
        );
        c.termination = Termination::IdleDetect;
        let out = run(&c).unwrap();
        assert_eq!(out.outcome, Outcome::Terminated);
        let rounds = terminate_rounds(&out.trace);
        assert_eq!(rounds.len(), n);
        let first_broadcast = rounds[0] + 1;
        assert!(rounds
            .iter()
            .skip(1)
            .all(|r| *r < first_broadcast + n as Round));
        let enq_last = out
            .trace
            .events
            .iter()
            .filter(|e| matches!(e.event, Event::Enqueue { .. }))
            .map(|e| e.round)
            .max()
            .unwrap();
        assert!(rounds[0] > enq_last);
    }
}

#[test]
fn adaptive_kinds_need_the_view() {
    use dynqueue::dyngraph::{adversary_next_edges, AdversaryError, GraphTrace};
    let h = GraphTrace::new(4);
    assert!(matches!(
        adversary_next_edges(AdversaryKind::Trap, &h, None, 0),
        Err(AdversaryError::AdaptivityUnavailable(_))
    ));
}
