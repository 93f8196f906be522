//! Queuing for T-interval connected graphs: cycles of `ceil(n/T)` periods of
//! `2T` rounds, pipelining the smallest requests and enqueuing `gamma` of
//! them at once at every cycle end.

use std::collections::BTreeSet;

use super::{EnqueueEvent, Message, QueueRequest, SuccValue};
use crate::dyngraph::{NodeId, Round};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alg2State {
    pub me: NodeId,
    pub succ: SuccValue,
    /// Every request this node has learned and not yet retired.
    pub known: BTreeSet<QueueRequest>,
    /// Requests already broadcast during the current period.
    pub sent: BTreeSet<QueueRequest>,
    pub period: u64,
    pub round_in_period: usize,
    pub cycle: u64,
}

impl Alg2State {
    pub fn new(me: NodeId, is_head: bool) -> Self {
        Alg2State {
            me,
            succ: if is_head {
                SuccValue::Bottom
            } else {
                SuccValue::Infinity
            },
            known: BTreeSet::new(),
            sent: BTreeSet::new(),
            period: 0,
            round_in_period: 0,
            cycle: 0,
        }
    }

    pub fn sync_clock(&mut self, round: Round, n: usize, t: usize) {
        let period_len = 2 * t as Round;
        let cycle_len = period_len * n.div_ceil(t) as Round;
        self.cycle = round / cycle_len;
        self.period = (round % cycle_len) / period_len;
        self.round_in_period = (round % period_len) as usize;
    }

    pub fn inject(&mut self, req: QueueRequest) {
        self.known.insert(req);
    }

    /// Smallest known request not yet sent this period.
    pub fn select_broadcast(&self) -> Message {
        self.known
            .difference(&self.sent)
            .next()
            .map_or(Message::Empty, |q| Message::Queue(*q))
    }

    /// Records a broadcast produced by [`Self::select_broadcast`].
    pub fn mark_sent(&mut self, m: &Message) {
        if let Message::Queue(q) = m {
            self.sent.insert(*q);
        }
    }

    pub fn integrate(mut self, received: &[Message]) -> Self {
        for m in received {
            if let Message::Queue(q) = m {
                self.known.insert(*q);
            }
        }
        self
    }

    pub fn end_period(mut self) -> Self {
        self.sent.clear();
        self
    }

    /// Splices the `gamma` smallest known requests behind the tail and
    /// retires them. `gamma` comes from the harness; zero means an idle
    /// cycle.
    pub fn end_cycle(mut self, gamma: usize) -> (Self, Vec<EnqueueEvent>) {
        let mut events = Vec::new();
        if gamma == 0 || self.known.is_empty() {
            return (self, events);
        }
        let prefix: Vec<QueueRequest> = self.known.iter().take(gamma).copied().collect();
        if self.succ == SuccValue::Bottom {
            self.succ = SuccValue::Node(prefix[0].origin);
            events.push(EnqueueEvent {
                predecessor: self.me,
                request: prefix[0],
            });
        }
        for pair in prefix.windows(2) {
            if pair[0].origin == self.me {
                self.succ = SuccValue::Node(pair[1].origin);
                events.push(EnqueueEvent {
                    predecessor: self.me,
                    request: pair[1],
                });
            }
        }
        if prefix.len() == gamma && prefix[gamma - 1].origin == self.me {
            self.succ = SuccValue::Bottom;
        }
        for q in &prefix {
            self.known.remove(q);
        }
        (self, events)
    }
}
