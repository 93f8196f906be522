//! Per-node protocol state machines.
//!
//! Every transition here is a plain function of the node's own state and
//! the messages delivered to it; nothing reaches across nodes. The engine
//! owns the clock and calls the end-of-phase hooks at the right rounds.

mod alg1;
mod alg2;
mod norep;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dyngraph::{NodeId, Round};

pub use alg1::{Alg1State, EnqueuePolicy, Phase};
pub use alg2::Alg2State;
pub use norep::{Handoff, NeighborRule, NoRepState};

/// A queue request `(init_round, origin)`. The derived ordering is the
/// lexicographic one used everywhere: earlier initiation first, then lower
/// origin UID.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueueRequest {
    pub init_round: Round,
    pub origin: NodeId,
}

impl QueueRequest {
    pub fn new(init_round: Round, origin: NodeId) -> Self {
        QueueRequest { init_round, origin }
    }
}

impl fmt::Display for QueueRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.init_round, self.origin)
    }
}

impl FromStr for QueueRequest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| format!("bad request {s:?}"))?;
        let (r, u) = inner
            .split_once(',')
            .ok_or_else(|| format!("bad request {s:?}"))?;
        Ok(QueueRequest {
            init_round: r.parse().map_err(|_| format!("bad round in {s:?}"))?,
            origin: u.parse().map_err(|_| format!("bad origin in {s:?}"))?,
        })
    }
}

/// A node's successor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuccValue {
    Node(NodeId),
    /// The node is the tail and waits for a successor.
    Bottom,
    /// The node is not (yet) in the queue.
    Infinity,
}

impl fmt::Display for SuccValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuccValue::Node(u) => write!(f, "{u}"),
            SuccValue::Bottom => f.write_str("BOT"),
            SuccValue::Infinity => f.write_str("INF"),
        }
    }
}

impl FromStr for SuccValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BOT" => Ok(SuccValue::Bottom),
            "INF" => Ok(SuccValue::Infinity),
            other => other
                .parse()
                .map(SuccValue::Node)
                .map_err(|_| format!("bad successor value {s:?}")),
        }
    }
}

/// What a node broadcasts in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Message {
    Queue(QueueRequest),
    Cancel(NodeId),
    Terminate,
    Empty,
}

impl Message {
    pub fn is_empty(&self) -> bool {
        matches!(self, Message::Empty)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Queue(q) => write!(f, "QUEUE{q}"),
            Message::Cancel(u) => write!(f, "CANCEL({u})"),
            Message::Terminate => f.write_str("TERMINATE"),
            Message::Empty => f.write_str("EMPTY"),
        }
    }
}

impl FromStr for Message {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("QUEUE") {
            return rest.parse().map(Message::Queue);
        }
        if let Some(rest) = s.strip_prefix("CANCEL(") {
            let u = rest
                .strip_suffix(')')
                .and_then(|u| u.parse().ok())
                .ok_or_else(|| format!("bad cancel {s:?}"))?;
            return Ok(Message::Cancel(u));
        }
        match s {
            "TERMINATE" => Ok(Message::Terminate),
            "EMPTY" => Ok(Message::Empty),
            _ => Err(format!("unknown message {s:?}")),
        }
    }
}

/// A message as seen by a receiver: the link it arrived on plus contents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub from: NodeId,
    pub message: Message,
}

/// `predecessor` set its successor to `request.origin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnqueueEvent {
    pub predecessor: NodeId,
    pub request: QueueRequest,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("node {node} received {message} during the {phase:?} phase")]
    PhaseMismatch {
        node: NodeId,
        phase: Phase,
        message: Message,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lexicographic_order_prefers_earlier_round() {
        assert!(QueueRequest::new(1, 9) < QueueRequest::new(3, 7));
        assert!(QueueRequest::new(1, 4) < QueueRequest::new(1, 9));
    }

    #[test]
    fn message_text_forms() {
        let cases = [
            (Message::Queue(QueueRequest::new(3, 5)), "QUEUE(3,5)"),
            (Message::Cancel(4), "CANCEL(4)"),
            (Message::Terminate, "TERMINATE"),
            (Message::Empty, "EMPTY"),
        ];
        for (m, text) in cases {
            assert_eq!(m.to_string(), text);
            assert_eq!(text.parse::<Message>(), Ok(m));
        }
        assert!("QUEUE(3)".parse::<Message>().is_err());
    }

    proptest! {
        #[test]
        fn request_order_is_total(r1 in 0u64..50, r2 in 0u64..50, a in 0usize..20, b in 0usize..20) {
            prop_assume!(a != b);
            let x = QueueRequest::new(r1, a);
            let y = QueueRequest::new(r2, b);
            prop_assert!((x < y) ^ (y < x));
        }

        #[test]
        fn succ_value_text_round_trips(v in prop_oneof![
            Just(SuccValue::Bottom),
            Just(SuccValue::Infinity),
            (0usize..1000).prop_map(SuccValue::Node),
        ]) {
            prop_assert_eq!(v.to_string().parse::<SuccValue>(), Ok(v));
        }
    }
}
