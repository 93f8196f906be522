//! Queuing for 1-interval connected graphs: cycles of `2n` rounds split
//! into an `n`-round search phase and an `n`-round cancelation phase.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use super::{EnqueueEvent, Message, ProtocolError, QueueRequest, SuccValue};
use crate::dyngraph::{NodeId, Round};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Search,
    Cancel,
}

/// How the tail picks its successor among the requests it holds at the
/// end of a search phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EnqueuePolicy {
    /// Earliest first-arrival round; ties go to the smaller request.
    FirstArrival,
    /// Smallest request in lexicographic order.
    #[default]
    LexSmallest,
}

impl EnqueuePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            EnqueuePolicy::FirstArrival => "first_arrival",
            EnqueuePolicy::LexSmallest => "lex_smallest",
        }
    }
}

impl FromStr for EnqueuePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_arrival" => Ok(EnqueuePolicy::FirstArrival),
            "lex_smallest" => Ok(EnqueuePolicy::LexSmallest),
            _ => Err(format!("unknown policy {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alg1State {
    pub me: NodeId,
    pub succ: SuccValue,
    /// Known pending requests with the round each first arrived here.
    pub requests: BTreeMap<QueueRequest, Round>,
    pub cancels: BTreeSet<NodeId>,
    pub phase: Phase,
    pub round_in_phase: usize,
    pub cycle: u64,
}

impl Alg1State {
    pub fn new(me: NodeId, is_head: bool) -> Self {
        Alg1State {
            me,
            succ: if is_head {
                SuccValue::Bottom
            } else {
                SuccValue::Infinity
            },
            requests: BTreeMap::new(),
            cancels: BTreeSet::new(),
            phase: Phase::Search,
            round_in_phase: 0,
            cycle: 0,
        }
    }

    /// Aligns phase counters with the shared global clock.
    pub fn sync_clock(&mut self, round: Round, n: usize) {
        let n = n as Round;
        let pos = round % (2 * n);
        self.cycle = round / (2 * n);
        if pos < n {
            self.phase = Phase::Search;
            self.round_in_phase = pos as usize;
        } else {
            self.phase = Phase::Cancel;
            self.round_in_phase = (pos - n) as usize;
        }
    }

    /// The node's own request becomes known to it.
    pub fn inject(&mut self, req: QueueRequest, round: Round) {
        self.requests.entry(req).or_insert(round);
    }

    pub fn select_broadcast(&self) -> Message {
        match self.phase {
            Phase::Search => self
                .requests
                .keys()
                .next()
                .map_or(Message::Empty, |q| Message::Queue(*q)),
            Phase::Cancel => self
                .cancels
                .iter()
                .next()
                .map_or(Message::Empty, |t| Message::Cancel(*t)),
        }
    }

    pub fn integrate(mut self, received: &[Message], round: Round) -> Result<Self, ProtocolError> {
        for m in received {
            match (self.phase, m) {
                (Phase::Search, Message::Queue(q)) => {
                    self.requests.entry(*q).or_insert(round);
                }
                (Phase::Cancel, Message::Cancel(t)) => {
                    self.cancels.insert(*t);
                }
                (_, Message::Empty | Message::Terminate) => {}
                (phase, message) => {
                    return Err(ProtocolError::PhaseMismatch {
                        node: self.me,
                        phase,
                        message: *message,
                    })
                }
            }
        }
        Ok(self)
    }

    /// The tail, if it knows any request, makes one its successor and
    /// starts a cancel for it.
    pub fn end_search(mut self, policy: EnqueuePolicy) -> (Self, Option<EnqueueEvent>) {
        if self.succ != SuccValue::Bottom {
            return (self, None);
        }
        let target = match policy {
            EnqueuePolicy::LexSmallest => self.requests.keys().next().copied(),
            EnqueuePolicy::FirstArrival => self
                .requests
                .iter()
                .min_by_key(|(q, arrived)| (**arrived, **q))
                .map(|(q, _)| *q),
        };
        let Some(target) = target else {
            return (self, None);
        };
        self.succ = SuccValue::Node(target.origin);
        self.cancels.insert(target.origin);
        let event = EnqueueEvent {
            predecessor: self.me,
            request: target,
        };
        (self, Some(event))
    }

    pub fn end_cancel(mut self) -> Self {
        if self.cancels.iter().next() == Some(&self.me) {
            self.succ = SuccValue::Bottom;
        }
        let cancels = std::mem::take(&mut self.cancels);
        self.requests.retain(|q, _| !cancels.contains(&q.origin));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(me: NodeId, phase: Phase) -> Alg1State {
        let mut s = Alg1State::new(me, false);
        s.phase = phase;
        s
    }

    #[test]
    fn search_broadcasts_smallest() {
        let mut s = state(0, Phase::Search);
        assert_eq!(s.select_broadcast(), Message::Empty);
        s.inject(QueueRequest::new(3, 7), 3);
        s.inject(QueueRequest::new(1, 9), 4);
        assert_eq!(
            s.select_broadcast(),
            Message::Queue(QueueRequest::new(1, 9))
        );
    }

    #[test]
    fn cancel_broadcasts_target() {
        let mut s = state(0, Phase::Cancel);
        s.cancels.insert(5);
        assert_eq!(s.select_broadcast(), Message::Cancel(5));
    }

    #[test]
    fn integrate_is_set_union() {
        let mut s = state(0, Phase::Search);
        s.inject(QueueRequest::new(1, 9), 2);
        let s = s
            .integrate(&[Message::Queue(QueueRequest::new(1, 4))], 5)
            .unwrap();
        assert_eq!(
            s.requests.keys().copied().collect::<Vec<_>>(),
            vec![QueueRequest::new(1, 4), QueueRequest::new(1, 9)]
        );
        let s = s
            .integrate(
                &[Message::Queue(QueueRequest::new(1, 9)), Message::Empty],
                6,
            )
            .unwrap();
        assert_eq!(s.requests.len(), 2);
        assert_eq!(s.requests[&QueueRequest::new(1, 9)], 2);

        let s = state(0, Phase::Cancel)
            .integrate(&[Message::Cancel(4), Message::Cancel(4)], 0)
            .unwrap();
        assert_eq!(s.cancels, BTreeSet::from([4]));
    }

    #[test]
    fn integrate_rejects_wrong_phase_traffic() {
        let err = state(2, Phase::Search)
            .integrate(&[Message::Cancel(1)], 0)
            .unwrap_err();
        assert!(matches!(err, ProtocolError::PhaseMismatch { node: 2, .. }));
        assert!(state(2, Phase::Cancel)
            .integrate(&[Message::Queue(QueueRequest::new(0, 1))], 0)
            .is_err());
    }

    fn tail_with_two_requests() -> Alg1State {
        let mut s = Alg1State::new(0, true);
        s.requests.insert(QueueRequest::new(0, 3), 2);
        s.requests.insert(QueueRequest::new(0, 5), 1);
        s
    }

    #[test]
    fn end_search_first_arrival() {
        let (s, ev) = tail_with_two_requests().end_search(EnqueuePolicy::FirstArrival);
        assert_eq!(s.succ, SuccValue::Node(5));
        assert_eq!(s.cancels, BTreeSet::from([5]));
        assert_eq!(ev.unwrap().request, QueueRequest::new(0, 5));
    }

    #[test]
    fn end_search_lex_smallest() {
        let (s, ev) = tail_with_two_requests().end_search(EnqueuePolicy::LexSmallest);
        assert_eq!(s.succ, SuccValue::Node(3));
        assert_eq!(s.cancels, BTreeSet::from([3]));
        assert_eq!(
            ev,
            Some(EnqueueEvent {
                predecessor: 0,
                request: QueueRequest::new(0, 3)
            })
        );
    }

    #[test]
    fn first_arrival_ties_go_to_smaller_request() {
        let mut s = Alg1State::new(0, true);
        s.requests.insert(QueueRequest::new(0, 6), 1);
        s.requests.insert(QueueRequest::new(0, 2), 1);
        let (s, _) = s.end_search(EnqueuePolicy::FirstArrival);
        assert_eq!(s.succ, SuccValue::Node(2));
    }

    #[test]
    fn only_the_tail_enqueues() {
        let mut s = tail_with_two_requests();
        s.succ = SuccValue::Infinity;
        let before = s.clone();
        let (after, ev) = s.end_search(EnqueuePolicy::LexSmallest);
        assert_eq!(after, before);
        assert!(ev.is_none());

        let (empty_tail, ev) = Alg1State::new(0, true).end_search(EnqueuePolicy::FirstArrival);
        assert_eq!(empty_tail.succ, SuccValue::Bottom);
        assert!(ev.is_none());
    }

    #[test]
    fn end_cancel_promotes_target_and_clears() {
        let mut s = state(5, Phase::Cancel);
        s.cancels.insert(5);
        let s = s.end_cancel();
        assert_eq!(s.succ, SuccValue::Bottom);
        assert!(s.cancels.is_empty());

        let mut s = state(2, Phase::Cancel);
        s.cancels.insert(5);
        s.requests.insert(QueueRequest::new(0, 5), 0);
        s.requests.insert(QueueRequest::new(0, 7), 0);
        let s = s.end_cancel();
        assert_eq!(s.succ, SuccValue::Infinity);
        assert_eq!(
            s.requests.keys().copied().collect::<Vec<_>>(),
            vec![QueueRequest::new(0, 7)]
        );

        let idle = state(3, Phase::Cancel);
        assert_eq!(idle.clone().end_cancel(), idle);
    }

    #[test]
    fn clock_sync_matches_cycle_layout() {
        let mut s = Alg1State::new(0, false);
        s.sync_clock(0, 4);
        assert_eq!((s.phase, s.round_in_phase, s.cycle), (Phase::Search, 0, 0));
        s.sync_clock(3, 4);
        assert_eq!((s.phase, s.round_in_phase), (Phase::Search, 3));
        s.sync_clock(4, 4);
        assert_eq!((s.phase, s.round_in_phase), (Phase::Cancel, 0));
        s.sync_clock(9, 4);
        assert_eq!((s.phase, s.round_in_phase, s.cycle), (Phase::Search, 1, 1));
    }
}
