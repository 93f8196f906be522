//! Forwarding without replication: exactly one node holds the request at
//! any time and hands it to a single neighbor each round.

use super::{Delivery, EnqueueEvent, Message, QueueRequest, SuccValue};
use crate::dyngraph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NeighborRule {
    /// Lowest-UID neighbor other than the one the message came from; the
    /// previous sender only when it is the sole neighbor.
    #[default]
    LowestAvoidingPrevious,
}

impl NeighborRule {
    pub fn choose(self, neighbors: &[NodeId], previous: Option<NodeId>) -> Option<NodeId> {
        match self {
            NeighborRule::LowestAvoidingPrevious => neighbors
                .iter()
                .copied()
                .filter(|&u| Some(u) != previous)
                .min()
                .or_else(|| neighbors.iter().copied().min()),
        }
    }
}

/// The holder passes `request` to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Handoff {
    pub to: NodeId,
    pub request: QueueRequest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoRepState {
    pub me: NodeId,
    pub holds: Option<QueueRequest>,
    pub previous_sender: Option<NodeId>,
    pub succ: SuccValue,
}

impl NoRepState {
    pub fn new(me: NodeId, is_head: bool) -> Self {
        NoRepState {
            me,
            holds: None,
            previous_sender: None,
            succ: if is_head {
                SuccValue::Bottom
            } else {
                SuccValue::Infinity
            },
        }
    }

    pub fn inject(&mut self, req: QueueRequest) {
        self.holds = Some(req);
    }

    pub fn outgoing(&self) -> Message {
        self.holds.map_or(Message::Empty, Message::Queue)
    }

    /// After delivery the holder knows this round's neighbors (everyone
    /// broadcasts every round) and gives its only copy away.
    pub fn step(mut self, received: &[Delivery], rule: NeighborRule) -> (Self, Option<Handoff>) {
        let Some(request) = self.holds else {
            return (self, None);
        };
        let neighbors: Vec<NodeId> = received.iter().map(|d| d.from).collect();
        match rule.choose(&neighbors, self.previous_sender) {
            Some(to) => {
                self.holds = None;
                (self, Some(Handoff { to, request }))
            }
            None => (self, None),
        }
    }

    /// Takes over a handed-off request; a tail enqueues it on the spot.
    pub fn accept(mut self, from: NodeId, request: QueueRequest) -> (Self, Option<EnqueueEvent>) {
        if self.succ == SuccValue::Bottom {
            self.succ = SuccValue::Node(request.origin);
            let ev = EnqueueEvent {
                predecessor: self.me,
                request,
            };
            return (self, Some(ev));
        }
        self.holds = Some(request);
        self.previous_sender = Some(from);
        (self, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from(u: NodeId) -> Delivery {
        Delivery {
            from: u,
            message: Message::Empty,
        }
    }

    #[test]
    fn forced_back_to_origin() {
        let req = QueueRequest::new(0, 0);
        let holder = NoRepState::new(1, false);
        let (holder, _) = holder.accept(0, req);
        let (holder, handoff) = holder.step(&[from(0)], NeighborRule::default());
        assert_eq!(
            handoff,
            Some(Handoff {
                to: 0,
                request: req
            })
        );
        assert_eq!(holder.holds, None);
    }

    #[test]
    fn avoids_previous_sender_when_possible() {
        let req = QueueRequest::new(0, 3);
        let (holder, _) = NoRepState::new(2, false).accept(0, req);
        let (_, handoff) = holder.step(&[from(0), from(1), from(4)], NeighborRule::default());
        assert_eq!(handoff.unwrap().to, 1);
    }

    #[test]
    fn tail_enqueues_on_receipt() {
        let req = QueueRequest::new(0, 3);
        let (tail, ev) = NoRepState::new(0, true).accept(3, req);
        assert_eq!(tail.succ, SuccValue::Node(3));
        assert_eq!(
            ev,
            Some(EnqueueEvent {
                predecessor: 0,
                request: req
            })
        );
    }

    #[test]
    fn non_holder_is_unchanged() {
        let s = NoRepState::new(4, false);
        let (after, handoff) = s.clone().step(&[], NeighborRule::default());
        assert_eq!(after, s);
        assert!(handoff.is_none());
        assert_eq!(s.outgoing(), Message::Empty);
    }
}
