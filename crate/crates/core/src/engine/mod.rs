//! Synchronous round executor.
//!
//! Each round: due requests are injected, every node picks one message,
//! the adversary sees those messages and fixes the edges, messages are
//! delivered along the edges, and nodes integrate what they received and
//! apply any phase-end transitions.

pub mod budget;
pub mod config;
pub mod trace;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dyngraph::{
    validate_round_graph, Adversary, AdversaryError, AdversaryView, GraphTrace, GraphViolation,
    NodeId, Round,
};
use crate::protocol::{
    Alg1State, Alg2State, Delivery, EnqueueEvent, Message, NeighborRule, NoRepState, ProtocolError,
    QueueRequest, SuccValue,
};
use crate::workload::{make_schedule, Schedule, WorkloadError};

pub use budget::{check_message_budget, BudgetViolation};
pub use config::{Algorithm, ConfigError, ScenarioConfig, Termination};
pub use trace::{Event, Outcome, Trace, TraceEvent, TraceMeta};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("round {round}: node {node}: {violation}")]
    BudgetViolation {
        round: Round,
        node: NodeId,
        violation: BudgetViolation,
    },
    #[error("round {round}: adversary produced an invalid graph: {violation}")]
    AdversaryViolation {
        round: Round,
        violation: GraphViolation,
    },
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("no completion within the horizon of {horizon} rounds")]
    HorizonExceeded { horizon: Round },
    #[error("the run has already finished")]
    Finished,
}

#[derive(Clone, Debug)]
enum NodeProto {
    Alg1(Alg1State),
    Alg2(Alg2State),
    NoRep(NoRepState),
}

impl NodeProto {
    fn succ(&self) -> SuccValue {
        match self {
            NodeProto::Alg1(s) => s.succ,
            NodeProto::Alg2(s) => s.succ,
            NodeProto::NoRep(s) => s.succ,
        }
    }
}

#[derive(Clone, Debug)]
struct NodeRuntime {
    proto: NodeProto,
    /// Consecutive rounds without receiving a QUEUE message.
    quiet: Round,
    terminated: bool,
}

/// A scenario in progress.
pub struct World {
    cfg: ScenarioConfig,
    horizon: Round,
    round: Round,
    nodes: Vec<NodeRuntime>,
    adversary: Adversary,
    graphs: GraphTrace,
    trace: Trace,
    schedule: Schedule,
    /// Injected requests not yet enqueued.
    active: BTreeSet<QueueRequest>,
    enqueued: BTreeSet<NodeId>,
    /// Number of requests the current cycle of `Alg2` enqueues.
    gamma: usize,
    outcome: Option<Outcome>,
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub trace: Trace,
    pub graphs: GraphTrace,
    pub schedule: Schedule,
    pub final_succ: Vec<SuccValue>,
    pub outcome: Outcome,
}

impl RunOutput {
    pub fn rounds(&self) -> Round {
        self.trace.meta.rounds
    }

    pub fn require_completed(self) -> Result<Self, EngineError> {
        match self.outcome {
            Outcome::HorizonExceeded => Err(EngineError::HorizonExceeded {
                horizon: self.config.horizon(),
            }),
            _ => Ok(self),
        }
    }
}

impl World {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let n = cfg.n;
        let schedule = make_schedule(
            cfg.schedule,
            n,
            cfg.k,
            cfg.head,
            cfg.seed,
            cfg.cycle_len().unwrap_or(1),
        )?;
        let nodes = (0..n)
            .map(|u| {
                let head = u == cfg.head;
                let proto = match cfg.algorithm {
                    Algorithm::Alg1 => NodeProto::Alg1(Alg1State::new(u, head)),
                    Algorithm::Alg2 => NodeProto::Alg2(Alg2State::new(u, head)),
                    Algorithm::NoRep => NodeProto::NoRep(NoRepState::new(u, head)),
                };
                NodeRuntime {
                    proto,
                    quiet: 0,
                    terminated: false,
                }
            })
            .collect();
        let trace = Trace::new(TraceMeta {
            n,
            head: cfg.head,
            algorithm: cfg.algorithm,
            t: cfg.t,
            policy: cfg.policy,
            rounds: 0,
            outcome: Outcome::HorizonExceeded,
        });
        Ok(World {
            horizon: cfg.horizon(),
            round: 0,
            nodes,
            adversary: Adversary::new(cfg.adversary, n).with_edge_prob(cfg.edge_prob),
            graphs: GraphTrace::new(n),
            trace,
            schedule,
            active: BTreeSet::new(),
            enqueued: BTreeSet::new(),
            gamma: 0,
            outcome: None,
            cfg,
        })
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn succ(&self) -> Vec<SuccValue> {
        self.nodes.iter().map(|n| n.proto.succ()).collect()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn graphs(&self) -> &GraphTrace {
        &self.graphs
    }

    /// Executes one round and updates the outcome if the run just ended.
    pub fn step_round(&mut self) -> Result<(), EngineError> {
        if self.outcome.is_some() {
            return Err(EngineError::Finished);
        }
        let r = self.round;
        let n = self.cfg.n;
        self.sync_clocks(r);
        self.inject_due(r);
        if let Some(len) = self.cfg.cycle_len() {
            if r.is_multiple_of(len) {
                self.gamma = self.active.len().min(self.cfg.t);
            }
        }

        let pending = self.select_messages(r)?;

        let succ = self.succ();
        let view = AdversaryView {
            pending: &pending,
            succ: &succ,
        };
        let g = self.adversary.next_edges(&self.graphs, Some(view), r)?;
        validate_round_graph(&g).map_err(|violation| EngineError::AdversaryViolation {
            round: r,
            violation,
        })?;
        let adj = g.adjacency();
        self.graphs
            .push(g)
            .map_err(|violation| EngineError::AdversaryViolation {
                round: r,
                violation,
            })?;

        let mut inboxes: Vec<Vec<Delivery>> = vec![Vec::new(); n];
        for (u, inbox) in inboxes.iter_mut().enumerate() {
            for &v in &adj[u] {
                inbox.push(Delivery {
                    from: v,
                    message: pending[v],
                });
            }
            inbox.sort_by_key(|d| d.from);
            for d in inbox.iter().filter(|d| !d.message.is_empty()) {
                self.trace.push(
                    r,
                    u,
                    Event::Recv {
                        from: d.from,
                        message: d.message,
                    },
                );
            }
        }

        match self.cfg.algorithm {
            Algorithm::Alg1 => self.advance_alg1(r, &inboxes)?,
            Algorithm::Alg2 => self.advance_alg2(r, &inboxes),
            Algorithm::NoRep => self.advance_norep(r, &inboxes),
        }
        if self.cfg.termination == Termination::IdleDetect {
            self.idle_detect_termination();
        }

        self.round = r + 1;
        self.trace.meta.rounds = self.round;
        self.check_done();
        Ok(())
    }

    fn sync_clocks(&mut self, r: Round) {
        let (n, t) = (self.cfg.n, self.cfg.t);
        for node in &mut self.nodes {
            match &mut node.proto {
                NodeProto::Alg1(s) => s.sync_clock(r, n),
                NodeProto::Alg2(s) => s.sync_clock(r, n, t),
                NodeProto::NoRep(_) => {}
            }
        }
    }

    fn inject_due(&mut self, r: Round) {
        for a in self.schedule.due(r) {
            let req = QueueRequest::new(r.max(a.init_round), a.node);
            match &mut self.nodes[a.node].proto {
                NodeProto::Alg1(s) => s.inject(req, r),
                NodeProto::Alg2(s) => s.inject(req),
                NodeProto::NoRep(s) => s.inject(req),
            }
            self.active.insert(req);
            self.trace
                .push(r, a.node, Event::RequestInit { request: req });
        }
    }

    fn select_messages(&mut self, r: Round) -> Result<Vec<Message>, EngineError> {
        let mut pending = Vec::with_capacity(self.nodes.len());
        for (u, node) in self.nodes.iter_mut().enumerate() {
            let m = if node.terminated {
                Message::Terminate
            } else {
                match &mut node.proto {
                    NodeProto::Alg1(s) => s.select_broadcast(),
                    NodeProto::Alg2(s) => {
                        let m = s.select_broadcast();
                        s.mark_sent(&m);
                        m
                    }
                    NodeProto::NoRep(s) => s.outgoing(),
                }
            };
            check_message_budget(&m, self.cfg.n, self.horizon).map_err(|violation| {
                EngineError::BudgetViolation {
                    round: r,
                    node: u,
                    violation,
                }
            })?;
            self.trace.push(r, u, Event::Send { message: m });
            pending.push(m);
        }
        Ok(pending)
    }

    fn record_enqueue(&mut self, r: Round, ev: EnqueueEvent) {
        self.trace.push(
            r,
            ev.predecessor,
            Event::Enqueue {
                request: ev.request,
            },
        );
        self.active.remove(&ev.request);
        self.enqueued.insert(ev.request.origin);
    }

    /// Logs a successor change and releases the next sequential request
    /// when an issuer becomes the tail.
    fn record_succ(&mut self, r: Round, u: NodeId, from: SuccValue, to: SuccValue) {
        if from == to {
            return;
        }
        self.trace.push(r, u, Event::SuccChange { from, to });
        if to == SuccValue::Bottom {
            self.nodes[u].quiet = 0;
            self.schedule.notify_completion(u, r + 1);
        }
    }

    fn note_receipts(&mut self, r: Round, inboxes: &[Vec<Delivery>]) {
        for (u, inbox) in inboxes.iter().enumerate() {
            let node = &mut self.nodes[u];
            if inbox.iter().any(|d| matches!(d.message, Message::Queue(_))) {
                node.quiet = 0;
            } else {
                node.quiet += 1;
            }
            if !node.terminated && inbox.iter().any(|d| d.message == Message::Terminate) {
                node.terminated = true;
                self.trace.push(r, u, Event::Terminate);
            }
        }
    }

    fn advance_alg1(&mut self, r: Round, inboxes: &[Vec<Delivery>]) -> Result<(), EngineError> {
        let n = self.cfg.n as Round;
        let pos = r % (2 * n);
        let was_terminated: Vec<bool> = self.nodes.iter().map(|x| x.terminated).collect();
        for u in 0..self.nodes.len() {
            if was_terminated[u] {
                continue;
            }
            let NodeProto::Alg1(s) = &self.nodes[u].proto else {
                unreachable!()
            };
            let msgs: Vec<Message> = inboxes[u].iter().map(|d| d.message).collect();
            let s = s.clone().integrate(&msgs, r)?;
            self.nodes[u].proto = NodeProto::Alg1(s);
        }
        self.note_receipts(r, inboxes);

        for (u, halted) in was_terminated.into_iter().enumerate() {
            if halted {
                continue;
            }
            let NodeProto::Alg1(s) = &self.nodes[u].proto else {
                unreachable!()
            };
            let before = s.succ;
            if pos == n - 1 {
                let (s, ev) = s.clone().end_search(self.cfg.policy);
                let after = s.succ;
                self.nodes[u].proto = NodeProto::Alg1(s);
                if let Some(ev) = ev {
                    self.record_enqueue(r, ev);
                    self.trace.push(
                        r,
                        u,
                        Event::Cancel {
                            target: ev.request.origin,
                        },
                    );
                }
                self.record_succ(r, u, before, after);
            } else if pos == 2 * n - 1 {
                let s = s.clone().end_cancel();
                let after = s.succ;
                self.nodes[u].proto = NodeProto::Alg1(s);
                self.record_succ(r, u, before, after);
            }
        }
        Ok(())
    }

    fn advance_alg2(&mut self, r: Round, inboxes: &[Vec<Delivery>]) {
        let period_len = 2 * self.cfg.t as Round;
        let cycle_len = self.cfg.cycle_len().unwrap_or(period_len);
        let period_end = r % period_len == period_len - 1;
        let cycle_end = r % cycle_len == cycle_len - 1;
        for (node, inbox) in self.nodes.iter_mut().zip(inboxes) {
            let NodeProto::Alg2(s) = &node.proto else {
                unreachable!()
            };
            let msgs: Vec<Message> = inbox.iter().map(|d| d.message).collect();
            let mut s = s.clone().integrate(&msgs);
            if period_end {
                s = s.end_period();
            }
            node.proto = NodeProto::Alg2(s);
        }
        self.note_receipts(r, inboxes);
        if !cycle_end {
            return;
        }
        let gamma = self.gamma;
        let mut enqueues = Vec::new();
        let mut changes = Vec::new();
        for u in 0..self.nodes.len() {
            let NodeProto::Alg2(s) = &self.nodes[u].proto else {
                unreachable!()
            };
            let before = s.succ;
            let (s, events) = s.clone().end_cycle(gamma);
            changes.push((u, before, s.succ));
            self.nodes[u].proto = NodeProto::Alg2(s);
            enqueues.extend(events);
        }
        // the chain is spliced in request order
        enqueues.sort_by_key(|ev| ev.request);
        for ev in enqueues {
            self.record_enqueue(r, ev);
        }
        for (u, before, after) in changes {
            self.record_succ(r, u, before, after);
        }
    }

    fn advance_norep(&mut self, r: Round, inboxes: &[Vec<Delivery>]) {
        self.note_receipts(r, inboxes);
        let Some(holder) = self
            .nodes
            .iter()
            .position(|x| matches!(&x.proto, NodeProto::NoRep(s) if s.holds.is_some()))
        else {
            return;
        };
        let NodeProto::NoRep(s) = &self.nodes[holder].proto else {
            unreachable!()
        };
        let (s, handoff) = s.clone().step(&inboxes[holder], NeighborRule::default());
        self.nodes[holder].proto = NodeProto::NoRep(s);
        let Some(h) = handoff else {
            return;
        };
        let NodeProto::NoRep(target) = &self.nodes[h.to].proto else {
            unreachable!()
        };
        let before = target.succ;
        let (target, ev) = target.clone().accept(holder, h.request);
        let after = target.succ;
        self.nodes[h.to].proto = NodeProto::NoRep(target);
        if let Some(ev) = ev {
            self.record_enqueue(r, ev);
            self.record_succ(r, h.to, before, after);
            let origin = ev.request.origin;
            if let NodeProto::NoRep(o) = &mut self.nodes[origin].proto {
                let prev = o.succ;
                o.succ = SuccValue::Bottom;
                self.record_succ(r, origin, prev, SuccValue::Bottom);
            }
        }
    }

    /// A tail that has heard no QUEUE message for `2n` consecutive rounds
    /// starts flooding TERMINATE from the next round on.
    pub fn idle_detect_termination(&mut self) {
        let limit = 2 * self.cfg.n as Round;
        for u in 0..self.nodes.len() {
            let node = &mut self.nodes[u];
            if !node.terminated && node.proto.succ() == SuccValue::Bottom && node.quiet >= limit {
                node.terminated = true;
                self.trace.push(self.round, u, Event::Terminate);
            }
        }
    }

    fn check_done(&mut self) {
        let done = match self.cfg.termination {
            Termination::OracleStop => {
                self.schedule.exhausted()
                    && self.enqueued.len() == self.schedule.total()
                    && self
                        .nodes
                        .iter()
                        .any(|x| x.proto.succ() == SuccValue::Bottom)
            }
            Termination::IdleDetect => self.nodes.iter().all(|x| x.terminated),
        };
        if done {
            let outcome = match self.cfg.termination {
                Termination::OracleStop => Outcome::Completed,
                Termination::IdleDetect => Outcome::Terminated,
            };
            self.outcome = Some(outcome);
            self.trace.meta.outcome = outcome;
        }
    }

    /// Steps until the run ends or the horizon is reached.
    pub fn run_to_end(mut self) -> Result<RunOutput, EngineError> {
        if self.cfg.k == 0 && self.cfg.termination == Termination::OracleStop {
            self.check_done();
        }
        while self.outcome.is_none() {
            if self.round >= self.horizon {
                self.outcome = Some(Outcome::HorizonExceeded);
                self.trace.meta.outcome = Outcome::HorizonExceeded;
                break;
            }
            self.step_round()?;
        }
        Ok(self.into_output())
    }

    fn into_output(self) -> RunOutput {
        let final_succ = self.succ();
        RunOutput {
            config: self.cfg,
            trace: self.trace,
            graphs: self.graphs,
            schedule: self.schedule,
            final_succ,
            outcome: self.outcome.unwrap_or(Outcome::HorizonExceeded),
        }
    }
}

/// Runs a scenario to completion, termination, or its horizon.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, EngineError> {
    World::new(cfg.clone())?.run_to_end()
}
