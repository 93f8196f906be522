//! Post-hoc checkers over execution traces and graph histories.
//!
//! Every checker is a pure function of a [`Trace`] (plus, where needed, the
//! graph history), so the same code validates fresh runs and imported
//! trace files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::dyngraph::{GraphTrace, NodeId, Round};
use crate::engine::config::cycle_len;
use crate::engine::{Algorithm, Event, Outcome, Trace};
use crate::protocol::{Message, QueueRequest, SuccValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("successor links loop: {0:?}")]
    CycleDetected(Vec<NodeId>),
    #[error("node {0} points outside the network")]
    DanglingSuccessor(NodeId),
    #[error("no tail is reachable from the head")]
    NoTail,
}

/// The queue from head to tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueOrder {
    pub nodes: Vec<NodeId>,
}

impl QueueOrder {
    pub fn head(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn tail(&self) -> NodeId {
        *self.nodes.last().expect("queue holds at least the head")
    }

    /// Members after the head, in queue order.
    pub fn after_head(&self) -> &[NodeId] {
        &self.nodes[1..]
    }
}

pub fn extract_queue(succ: &[SuccValue], head: NodeId) -> Result<QueueOrder, QueueError> {
    if head >= succ.len() {
        return Err(QueueError::DanglingSuccessor(head));
    }
    let mut nodes = vec![head];
    let mut seen = BTreeSet::from([head]);
    let mut cur = head;
    loop {
        match succ[cur] {
            SuccValue::Bottom => return Ok(QueueOrder { nodes }),
            SuccValue::Infinity => return Err(QueueError::NoTail),
            SuccValue::Node(v) if v >= succ.len() => {
                return Err(QueueError::DanglingSuccessor(cur))
            }
            SuccValue::Node(v) => {
                nodes.push(v);
                if !seen.insert(v) {
                    return Err(QueueError::CycleDetected(nodes));
                }
                cur = v;
            }
        }
    }
}

/// Successor values after every recorded change has been applied.
pub fn final_succ(trace: &Trace) -> Vec<SuccValue> {
    let mut succ = initial_succ(trace);
    for e in &trace.events {
        if let Event::SuccChange { to, .. } = e.event {
            if e.node < succ.len() {
                succ[e.node] = to;
            }
        }
    }
    succ
}

fn initial_succ(trace: &Trace) -> Vec<SuccValue> {
    let mut succ = vec![SuccValue::Infinity; trace.meta.n];
    if trace.meta.head < succ.len() {
        succ[trace.meta.head] = SuccValue::Bottom;
    }
    succ
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// A liveness property could not be decided because the run hit its
    /// horizon.
    Incomplete,
}

impl CheckStatus {
    fn word(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Incomplete => "INCOMPLETE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        Check {
            name,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} detail={}",
            self.name,
            self.status.word(),
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    /// No check failed; incomplete liveness checks are tolerated.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        self.checks.iter().map(|c| format!("{c}\n")).collect()
    }
}

/// Requests in the order their Enqueue events occur.
pub fn enqueue_order(trace: &Trace) -> Vec<(Round, NodeId, QueueRequest)> {
    trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            Event::Enqueue { request } => Some((e.round, e.node, request)),
            _ => None,
        })
        .collect()
}

/// Issuers seen in RequestInit events, in initiation order.
pub fn initiated_issuers(trace: &Trace) -> Vec<NodeId> {
    trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            Event::RequestInit { request } => Some(request.origin),
            _ => None,
        })
        .collect()
}

/// Eventual enqueue (`exactly_once.eventual`), at most one enqueue per
/// request (`exactly_once.at_most_once`) and agreement between the final
/// queue and the enqueue event order (`exactly_once.order`).
pub fn check_exactly_once(trace: &Trace, issuers: &[NodeId]) -> Vec<Check> {
    let order = enqueue_order(trace);
    let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (_, _, q) in &order {
        *counts.entry(q.origin).or_default() += 1;
    }

    let missing: Vec<NodeId> = issuers
        .iter()
        .copied()
        .filter(|u| !counts.contains_key(u))
        .collect();
    let eventual = if missing.is_empty() {
        Check::new(
            "exactly_once.eventual",
            true,
            format!("{} of {} enqueued", issuers.len(), issuers.len()),
        )
    } else {
        let detail = format!(
            "{} of {} never enqueued {:?}",
            missing.len(),
            issuers.len(),
            missing
        );
        let status = if trace.meta.outcome == Outcome::HorizonExceeded {
            CheckStatus::Incomplete
        } else {
            CheckStatus::Fail
        };
        Check {
            name: "exactly_once.eventual",
            status,
            detail,
        }
    };

    let dups: Vec<NodeId> = counts
        .iter()
        .filter(|(_, c)| **c > 1)
        .map(|(u, _)| *u)
        .collect();
    let at_most_once = Check::new(
        "exactly_once.at_most_once",
        dups.is_empty(),
        if dups.is_empty() {
            "no duplicate enqueue".to_string()
        } else {
            format!("enqueued more than once {dups:?}")
        },
    );

    let event_order: Vec<NodeId> = order.iter().map(|(_, _, q)| q.origin).collect();
    let ordered = match extract_queue(&final_succ(trace), trace.meta.head) {
        Ok(q) if q.after_head() == event_order.as_slice() => {
            Check::new("exactly_once.order", true, format!("queue {:?}", q.nodes))
        }
        Ok(q) => Check::new(
            "exactly_once.order",
            false,
            format!("queue {:?} but enqueue events {:?}", q.nodes, event_order),
        ),
        Err(e) => Check::new("exactly_once.order", false, e.to_string()),
    };
    vec![eventual, at_most_once, ordered]
}

/// Maximal runs of rounds at whose end no node is a tail, as
/// `(first round, length)`.
pub fn tailless_spans(trace: &Trace) -> Vec<(Round, Round)> {
    let mut succ = initial_succ(trace);
    let mut tails = succ.iter().filter(|s| **s == SuccValue::Bottom).count();
    let mut spans = Vec::new();
    let mut open: Option<(Round, Round)> = None;
    let mut events = trace.events.iter().peekable();
    for r in 0..trace.meta.rounds {
        while let Some(e) = events.next_if(|e| e.round == r) {
            if let Event::SuccChange { to, .. } = e.event {
                if e.node >= succ.len() {
                    continue;
                }
                tails -= usize::from(succ[e.node] == SuccValue::Bottom);
                tails += usize::from(to == SuccValue::Bottom);
                succ[e.node] = to;
            }
        }
        if tails == 0 {
            open = Some(open.map_or((r, 1), |(s, l)| (s, l + 1)));
        } else if let Some(span) = open.take() {
            spans.push(span);
        }
    }
    spans.extend(open);
    spans
}

/// Nodes whose round-`r` state depends on `u`'s initial state, following
/// edges forward through rounds `0..r`.
pub fn influence_set(graphs: &GraphTrace, u: NodeId, r: Round) -> BTreeSet<NodeId> {
    let mut set = BTreeSet::from([u]);
    for g in graphs.rounds().iter().take(r as usize) {
        spread(&mut set, &g.adjacency());
    }
    set
}

/// Nodes whose initial state can affect `u` by round `r`.
pub fn inbound_influence_set(graphs: &GraphTrace, u: NodeId, r: Round) -> BTreeSet<NodeId> {
    let mut set = BTreeSet::from([u]);
    for g in graphs.rounds().iter().take(r as usize).rev() {
        spread(&mut set, &g.adjacency());
    }
    set
}

fn spread(set: &mut BTreeSet<NodeId>, adj: &[Vec<NodeId>]) {
    let reached: Vec<NodeId> = set.iter().flat_map(|&v| adj[v].iter().copied()).collect();
    set.extend(reached);
}

/// Both directions of influence reach at least `min(r + 1, n)` nodes.
pub fn influence_growth(graphs: &GraphTrace, u: NodeId, r: Round) -> bool {
    let need = ((r + 1) as usize).min(graphs.n);
    influence_set(graphs, u, r).len() >= need && inbound_influence_set(graphs, u, r).len() >= need
}

/// Forward influence checked for every start node and every round prefix.
fn influence_growth_all(graphs: &GraphTrace) -> Result<(), (NodeId, Round)> {
    let n = graphs.n;
    let adjs: Vec<Vec<Vec<NodeId>>> = graphs.rounds().iter().map(|g| g.adjacency()).collect();
    for u in 0..n {
        let mut set = BTreeSet::from([u]);
        for (r, adj) in adjs.iter().enumerate() {
            if set.len() == n {
                break;
            }
            spread(&mut set, adj);
            if set.len() < (r + 2).min(n) {
                return Err((u, r as Round + 1));
            }
        }
    }
    Ok(())
}

/// First round at which each node learned each request.
struct Knowledge {
    first: Vec<BTreeMap<QueueRequest, Round>>,
    init: BTreeMap<QueueRequest, Round>,
    enqueued: BTreeMap<QueueRequest, Round>,
}

impl Knowledge {
    fn build(trace: &Trace) -> Self {
        let mut first = vec![BTreeMap::new(); trace.meta.n];
        let mut init = BTreeMap::new();
        let mut enqueued = BTreeMap::new();
        for e in &trace.events {
            let learned = match e.event {
                Event::RequestInit { request } => {
                    init.insert(request, e.round);
                    Some(request)
                }
                Event::Recv {
                    message: Message::Queue(q),
                    ..
                } => Some(q),
                Event::Enqueue { request } => {
                    enqueued.entry(request).or_insert(e.round);
                    None
                }
                _ => None,
            };
            if let (Some(q), Some(map)) = (learned, first.get_mut(e.node)) {
                map.entry(q).or_insert(e.round);
            }
        }
        Knowledge {
            first,
            init,
            enqueued,
        }
    }

    /// Initiated by `start` and not enqueued before it.
    fn active_at(&self, start: Round) -> Vec<QueueRequest> {
        self.init
            .iter()
            .filter(|(q, r)| **r <= start && self.enqueued.get(q).is_none_or(|e| *e >= start))
            .map(|(q, _)| *q)
            .collect()
    }

    fn known_everywhere_by(&self, q: &QueueRequest, deadline: Round) -> bool {
        self.first
            .iter()
            .all(|m| m.get(q).is_some_and(|r| *r <= deadline))
    }
}

fn trace_cycle_len(trace: &Trace) -> Option<Round> {
    cycle_len(trace.meta.algorithm, trace.meta.n, trace.meta.t)
}

/// Number of requests the structured algorithms should spread in a cycle
/// with `beta` active requests.
fn cycle_quota(trace: &Trace, beta: usize) -> usize {
    match trace.meta.algorithm {
        Algorithm::Alg1 => beta.min(1),
        Algorithm::Alg2 => beta.min(trace.meta.t),
        Algorithm::NoRep => 0,
    }
}

/// The requests a cycle must spread reached every node in time: for
/// `Alg1` the smallest active request within the first `n - 1` search
/// rounds, for `Alg2` the `min(beta, T)` smallest by the cycle's end.
/// Cycles not fully covered by the trace pass vacuously.
pub fn dissemination_check(trace: &Trace, cycle: u64) -> bool {
    dissemination_with(&Knowledge::build(trace), trace, cycle)
}

fn dissemination_with(k: &Knowledge, trace: &Trace, cycle: u64) -> bool {
    let Some(len) = trace_cycle_len(trace) else {
        return true;
    };
    let n = trace.meta.n as Round;
    let start = cycle * len;
    let deadline = match trace.meta.algorithm {
        Algorithm::Alg1 => start + n.saturating_sub(2),
        _ => start + len - 1,
    };
    if deadline >= trace.meta.rounds {
        return true;
    }
    let active = k.active_at(start);
    let quota = cycle_quota(trace, active.len());
    active
        .iter()
        .take(quota)
        .all(|q| k.known_everywhere_by(q, deadline))
}

fn complete_cycles(trace: &Trace) -> u64 {
    trace_cycle_len(trace).map_or(0, |len| trace.meta.rounds / len)
}

/// First cycle at whose end two nodes disagree on the `gamma` smallest
/// known requests (`Alg2` only).
pub fn prefix_agreement(trace: &Trace) -> Result<(), u64> {
    if trace.meta.algorithm != Algorithm::Alg2 {
        return Ok(());
    }
    let Some(len) = trace_cycle_len(trace) else {
        return Ok(());
    };
    let k = Knowledge::build(trace);
    let n = trace.meta.n;
    let mut known: Vec<BTreeSet<QueueRequest>> = vec![BTreeSet::new(); n];
    let mut events = trace.events.iter().peekable();
    for cycle in 0..complete_cycles(trace) {
        let start = cycle * len;
        let end = start + len - 1;
        while let Some(e) = events.next_if(|e| e.round <= end) {
            let q = match e.event {
                Event::RequestInit { request } => request,
                Event::Recv {
                    message: Message::Queue(q),
                    ..
                } => q,
                _ => continue,
            };
            if let Some(set) = known.get_mut(e.node) {
                set.insert(q);
            }
        }
        let gamma = cycle_quota(trace, k.active_at(start).len());
        if gamma == 0 {
            continue;
        }
        let prefixes: Vec<Vec<QueueRequest>> = known
            .iter()
            .map(|s| s.iter().take(gamma).copied().collect())
            .filter(|p: &Vec<QueueRequest>| !p.is_empty())
            .collect();
        if prefixes.windows(2).any(|w| w[0] != w[1]) {
            return Err(cycle);
        }
        for set in &mut known {
            let drop: Vec<QueueRequest> = set.iter().take(gamma).copied().collect();
            for q in drop {
                set.remove(&q);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleStats {
    pub cycle: u64,
    /// Active requests at the cycle's first round.
    pub beta: usize,
    /// Requests the cycle is expected to enqueue.
    pub gamma: usize,
    pub enqueues: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metrics {
    /// Rounds until the run finished, if it did.
    pub completion_round: Option<Round>,
    pub rounds_total: Round,
    pub enqueue_rounds: Vec<(QueueRequest, Round)>,
    pub cycles: Vec<CycleStats>,
    pub cycles_used: u64,
    pub max_tailless_span: Round,
    /// Smallest `beta` over cycles that had any active request.
    pub alpha: Option<usize>,
}

pub fn compute_metrics(trace: &Trace) -> Metrics {
    let k = Knowledge::build(trace);
    let rounds = trace.meta.rounds;
    let enqueue_rounds: Vec<(QueueRequest, Round)> = enqueue_order(trace)
        .into_iter()
        .map(|(r, _, q)| (q, r))
        .collect();
    let mut cycles = Vec::new();
    let mut cycles_used = 0;
    if let Some(len) = trace_cycle_len(trace) {
        cycles_used = rounds.div_ceil(len);
        for c in 0..cycles_used {
            let start = c * len;
            let beta = k.active_at(start).len();
            let enqueues = enqueue_rounds
                .iter()
                .filter(|(_, r)| (start..start + len).contains(r))
                .count();
            cycles.push(CycleStats {
                cycle: c,
                beta,
                gamma: cycle_quota(trace, beta),
                enqueues,
            });
        }
    }
    let alpha = cycles.iter().map(|c| c.beta).filter(|b| *b >= 1).min();
    Metrics {
        completion_round: match trace.meta.outcome {
            Outcome::HorizonExceeded => None,
            _ => Some(rounds),
        },
        rounds_total: rounds,
        enqueue_rounds,
        cycles,
        cycles_used,
        max_tailless_span: tailless_spans(trace).iter().map(|s| s.1).max().unwrap_or(0),
        alpha,
    }
}

/// Rounds are non-decreasing, each round is ordered initiations, sends,
/// receipts, state changes, and every node sends exactly once per round.
pub fn check_event_order(trace: &Trace) -> Check {
    let mut prev: Option<(Round, u8)> = None;
    let mut sends: BTreeMap<Round, usize> = BTreeMap::new();
    for e in &trace.events {
        let key = (e.round, e.event.stage());
        if prev.is_some_and(|p| p > key) {
            return Check::new(
                "event_order",
                false,
                format!("round {} out of order at node {}", e.round, e.node),
            );
        }
        prev = Some(key);
        if matches!(e.event, Event::Send { .. }) {
            *sends.entry(e.round).or_default() += 1;
        }
    }
    let n = trace.meta.n;
    if let Some(r) = (0..trace.meta.rounds).find(|r| sends.get(r).copied().unwrap_or(0) != n) {
        return Check::new(
            "event_order",
            false,
            format!("round {r} lacks one send per node"),
        );
    }
    Check::new(
        "event_order",
        true,
        format!("{} events", trace.events.len()),
    )
}

/// Successor variables only move tail to linked, or waiting to tail
/// (`Alg2` chains also link a waiting node directly), and each recorded
/// change starts from the value the replay holds.
pub fn check_succ_transitions(trace: &Trace) -> Check {
    let mut succ = initial_succ(trace);
    for e in &trace.events {
        let Event::SuccChange { from, to } = e.event else {
            continue;
        };
        let Some(cur) = succ.get_mut(e.node) else {
            return Check::new(
                "succ_transitions",
                false,
                format!("unknown node {}", e.node),
            );
        };
        let legal = match (from, to) {
            (SuccValue::Bottom, SuccValue::Node(_)) | (SuccValue::Infinity, SuccValue::Bottom) => {
                true
            }
            (SuccValue::Infinity, SuccValue::Node(_)) => trace.meta.algorithm == Algorithm::Alg2,
            _ => false,
        };
        if *cur != from || !legal {
            return Check::new(
                "succ_transitions",
                false,
                format!(
                    "round {} node {}: {}->{} while holding {}",
                    e.round, e.node, from, to, cur
                ),
            );
        }
        *cur = to;
    }
    Check::new("succ_transitions", true, "all transitions legal")
}

/// Each `Alg1` cycle enqueues at most one request, and exactly one when a
/// request was active at its start.
pub fn check_alg1_cycle_enqueues(trace: &Trace) -> Check {
    let m = compute_metrics(trace);
    let full = complete_cycles(trace);
    let bad = m
        .cycles
        .iter()
        .find(|c| c.enqueues > 1 || (c.cycle < full && c.beta >= 1 && c.enqueues != 1));
    match bad {
        Some(c) => Check::new(
            "cycle_enqueues",
            false,
            format!("cycle {} beta={} enqueues={}", c.cycle, c.beta, c.enqueues),
        ),
        None => Check::new("cycle_enqueues", true, format!("{} cycles", m.cycles.len())),
    }
}

/// `Alg1`: no tailless span exceeds `n`, and every full cycle with an
/// enqueue has one of exactly `n` rounds.
pub fn check_tailless(trace: &Trace) -> Check {
    let n = trace.meta.n as Round;
    let spans = tailless_spans(trace);
    if let Some(s) = spans.iter().find(|s| s.1 > n) {
        return Check::new(
            "tailless",
            false,
            format!("span of {} rounds from round {}", s.1, s.0),
        );
    }
    if trace.meta.algorithm == Algorithm::Alg1 {
        let len = 2 * n;
        let m = compute_metrics(trace);
        for c in m.cycles.iter().filter(|c| c.enqueues > 0) {
            let start = c.cycle * len + n - 1;
            if start + n <= trace.meta.rounds && !spans.contains(&(start, n)) {
                return Check::new(
                    "tailless",
                    false,
                    format!("cycle {} lacks an {n}-round span", c.cycle),
                );
            }
        }
    }
    Check::new(
        "tailless",
        true,
        format!("max span {}", spans.iter().map(|s| s.1).max().unwrap_or(0)),
    )
}

/// Nodes that held the request at some round (senders of QUEUE).
pub fn queue_holders(trace: &Trace) -> BTreeSet<NodeId> {
    trace
        .events
        .iter()
        .filter(|e| {
            matches!(
                e.event,
                Event::Send {
                    message: Message::Queue(_)
                }
            )
        })
        .map(|e| e.node)
        .collect()
}

/// Runs every checker that applies to the trace's algorithm. `graphs`
/// enables the influence check; `issuers` defaults to the initiated ones.
pub fn verify_all(
    trace: &Trace,
    graphs: Option<&GraphTrace>,
    issuers: Option<&[NodeId]>,
) -> Report {
    let derived;
    let issuers = match issuers {
        Some(i) => i,
        None => {
            derived = initiated_issuers(trace);
            &derived
        }
    };
    let mut checks = check_exactly_once(trace, issuers);
    checks.push(check_event_order(trace));
    checks.push(check_succ_transitions(trace));
    if trace.meta.algorithm != Algorithm::NoRep {
        checks.push(match extract_queue(&final_succ(trace), trace.meta.head) {
            Ok(q) => Check::new("queue_chain", true, format!("{} members", q.nodes.len())),
            Err(e) => Check::new("queue_chain", false, e.to_string()),
        });
        let k = Knowledge::build(trace);
        let cycles = complete_cycles(trace);
        let failed = (0..cycles).find(|&c| !dissemination_with(&k, trace, c));
        checks.push(Check::new(
            "dissemination",
            failed.is_none(),
            match failed {
                Some(c) => format!("cycle {c} did not spread its quota"),
                None => format!("{cycles} cycles"),
            },
        ));
    }
    match trace.meta.algorithm {
        Algorithm::Alg1 => {
            checks.push(check_tailless(trace));
            checks.push(check_alg1_cycle_enqueues(trace));
        }
        Algorithm::Alg2 => {
            let agree = prefix_agreement(trace);
            checks.push(Check::new(
                "prefix_agreement",
                agree.is_ok(),
                match agree {
                    Ok(()) => "all cycles agree".to_string(),
                    Err(c) => format!("inconsistent prefix at cycle {c}"),
                },
            ));
        }
        Algorithm::NoRep => {}
    }
    if let Some(g) = graphs {
        let res = influence_growth_all(g);
        checks.push(Check::new(
            "influence_growth",
            res.is_ok(),
            match res {
                Ok(()) => format!("{} rounds", g.len()),
                Err((u, r)) => format!("node {u} reaches too few nodes by round {r}"),
            },
        ));
    }
    Report { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::RoundGraph;
    use crate::engine::TraceMeta;
    use crate::protocol::EnqueuePolicy;
    use proptest::prelude::*;

    use SuccValue::{Bottom as B, Infinity as I, Node as N};

    fn meta(n: usize, rounds: Round) -> TraceMeta {
        TraceMeta {
            n,
            head: 0,
            algorithm: Algorithm::Alg1,
            t: 1,
            policy: EnqueuePolicy::LexSmallest,
            rounds,
            outcome: Outcome::Completed,
        }
    }

    #[test]
    fn extract_queue_examples() {
        assert_eq!(
            extract_queue(&[N(2), B, N(1)], 0).unwrap().nodes,
            vec![0, 2, 1]
        );
        assert_eq!(extract_queue(&[B, I, I], 0).unwrap().nodes, vec![0]);
        assert!(matches!(
            extract_queue(&[N(1), N(0)], 0),
            Err(QueueError::CycleDetected(_))
        ));
        assert_eq!(
            extract_queue(&[N(7), B], 0),
            Err(QueueError::DanglingSuccessor(0))
        );
        assert_eq!(extract_queue(&[N(1), I], 0), Err(QueueError::NoTail));
    }

    #[test]
    fn duplicate_enqueue_is_flagged() {
        let mut t = Trace::new(meta(3, 4));
        let q = QueueRequest::new(0, 1);
        t.push(1, 0, Event::Enqueue { request: q });
        t.push(1, 0, Event::SuccChange { from: B, to: N(1) });
        t.push(2, 2, Event::Enqueue { request: q });
        let checks = check_exactly_once(&t, &[1]);
        assert_eq!(checks[0].status, CheckStatus::Pass);
        assert_eq!(checks[1].status, CheckStatus::Fail);
    }

    #[test]
    fn truncated_run_is_incomplete() {
        let mut m = meta(3, 2);
        m.outcome = Outcome::HorizonExceeded;
        let t = Trace::new(m);
        let checks = check_exactly_once(&t, &[2]);
        assert_eq!(checks[0].status, CheckStatus::Incomplete);
        let report = Report { checks };
        assert!(report.passed());
    }

    #[test]
    fn tailless_span_examples() {
        assert!(tailless_spans(&Trace::new(meta(4, 8))).is_empty());
        let mut t = Trace::new(meta(4, 8));
        t.push(3, 0, Event::SuccChange { from: B, to: N(2) });
        t.push(7, 2, Event::SuccChange { from: I, to: B });
        assert_eq!(tailless_spans(&t), vec![(3, 4)]);
        assert!(check_tailless(&t).passed());
    }

    #[test]
    fn report_line_format() {
        let c = Check::new("tailless", true, "max span 4");
        assert_eq!(c.to_string(), "CHECK tailless PASS detail=max span 4");
    }

    #[test]
    fn illegal_transition_is_caught() {
        let mut t = Trace::new(meta(3, 2));
        t.push(0, 1, Event::SuccChange { from: I, to: N(2) });
        assert!(!check_succ_transitions(&t).passed());
    }

    fn path_history(n: usize, rounds: Round) -> GraphTrace {
        let mut h = GraphTrace::new(n);
        for r in 0..rounds {
            h.push(RoundGraph::new(n, r, (1..n).map(|v| (v - 1, v))))
                .unwrap();
        }
        h
    }

    #[test]
    fn influence_examples() {
        let h = path_history(4, 3);
        assert_eq!(influence_set(&h, 0, 0).len(), 1);
        // explicit reachability on the path 0-1-2-3
        assert_eq!(influence_set(&h, 0, 2), BTreeSet::from([0, 1, 2]));
        assert_eq!(inbound_influence_set(&h, 3, 2), BTreeSet::from([1, 2, 3]));
        let mut c = GraphTrace::new(5);
        c.push(RoundGraph::complete(5, 0)).unwrap();
        assert_eq!(influence_set(&c, 2, 1).len(), 5);
        assert!(influence_growth(&h, 1, 3));
    }

    proptest! {
        #[test]
        fn extract_queue_on_random_chains(perm in Just((1usize..8).collect::<Vec<_>>()).prop_shuffle(), len in 0usize..8) {
            let n = 8;
            let chain: Vec<NodeId> = std::iter::once(0).chain(perm.into_iter().take(len)).collect();
            let mut succ = vec![I; n];
            for w in chain.windows(2) {
                succ[w[0]] = N(w[1]);
            }
            succ[*chain.last().unwrap()] = B;
            let q = extract_queue(&succ, 0).unwrap();
            prop_assert_eq!(q.nodes, chain);
        }
    }
}
