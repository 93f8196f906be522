//! Execution traces: one line per event, in round order.
//!
//! ```text
//! # n=4 head=0 algorithm=alg1 T=1 policy=lex_smallest rounds=8 outcome=completed
//! round=0 kind=RequestInit node=2 payload=(0,2)
//! round=0 kind=Send node=2 payload=QUEUE(0,2)
//! round=0 kind=Recv node=0 payload=QUEUE(0,2)@2
//! ```
//!
//! Within a round, events appear as request initiations, sends, receipts,
//! then state changes.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::config::Algorithm;
use crate::dyngraph::{NodeId, Round};
use crate::protocol::{EnqueuePolicy, Message, QueueRequest, SuccValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Every scheduled request was served.
    Completed,
    /// Every node halted on TERMINATE.
    Terminated,
    HorizonExceeded,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Terminated => "terminated",
            Outcome::HorizonExceeded => "horizon_exceeded",
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "completed" => Ok(Outcome::Completed),
            "terminated" => Ok(Outcome::Terminated),
            "horizon_exceeded" => Ok(Outcome::HorizonExceeded),
            _ => Err(format!("unknown outcome {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Send {
        message: Message,
    },
    Recv {
        from: NodeId,
        message: Message,
    },
    /// The event's node became the predecessor of `request.origin`.
    Enqueue {
        request: QueueRequest,
    },
    Cancel {
        target: NodeId,
    },
    SuccChange {
        from: SuccValue,
        to: SuccValue,
    },
    RequestInit {
        request: QueueRequest,
    },
    Terminate,
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Send { .. } => "Send",
            Event::Recv { .. } => "Recv",
            Event::Enqueue { .. } => "Enqueue",
            Event::Cancel { .. } => "Cancel",
            Event::SuccChange { .. } => "SuccChange",
            Event::RequestInit { .. } => "RequestInit",
            Event::Terminate => "Terminate",
        }
    }

    /// Position class inside a round.
    pub fn stage(&self) -> u8 {
        match self {
            Event::RequestInit { .. } => 0,
            Event::Send { .. } => 1,
            Event::Recv { .. } => 2,
            _ => 3,
        }
    }

    fn payload(&self) -> String {
        match self {
            Event::Send { message } => message.to_string(),
            Event::Recv { from, message } => format!("{message}@{from}"),
            Event::Enqueue { request } | Event::RequestInit { request } => request.to_string(),
            Event::Cancel { target } => target.to_string(),
            Event::SuccChange { from, to } => format!("{from}->{to}"),
            Event::Terminate => "-".into(),
        }
    }

    fn parse(kind: &str, payload: &str) -> Result<Self, String> {
        let node = |s: &str| s.parse::<NodeId>().map_err(|e| format!("{s:?}: {e}"));
        Ok(match kind {
            "Send" => Event::Send {
                message: payload.parse()?,
            },
            "Recv" => {
                let (m, from) = payload
                    .rsplit_once('@')
                    .ok_or_else(|| format!("missing sender in {payload:?}"))?;
                Event::Recv {
                    from: node(from)?,
                    message: m.parse()?,
                }
            }
            "Enqueue" => Event::Enqueue {
                request: payload.parse()?,
            },
            "RequestInit" => Event::RequestInit {
                request: payload.parse()?,
            },
            "Cancel" => Event::Cancel {
                target: node(payload)?,
            },
            "SuccChange" => {
                let (a, b) = payload
                    .split_once("->")
                    .ok_or_else(|| format!("bad transition {payload:?}"))?;
                Event::SuccChange {
                    from: a.parse()?,
                    to: b.parse()?,
                }
            }
            "Terminate" => Event::Terminate,
            other => return Err(format!("unknown event kind {other:?}")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub round: Round,
    pub node: NodeId,
    pub event: Event,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "round={} kind={} node={} payload={}",
            self.round,
            self.event.kind(),
            self.node,
            self.event.payload()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceMeta {
    pub n: usize,
    pub head: NodeId,
    pub algorithm: Algorithm,
    pub t: usize,
    pub policy: EnqueuePolicy,
    /// Rounds executed.
    pub rounds: Round,
    pub outcome: Outcome,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing `#` header line")]
    MissingHeader,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Trace {
            meta,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, round: Round, node: NodeId, event: Event) {
        self.events.push(TraceEvent { round, node, event });
    }

    pub fn in_round(&self, round: Round) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.round == round)
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = format!(
            "# n={} head={} algorithm={} T={} policy={} rounds={} outcome={}\n",
            m.n,
            m.head,
            m.algorithm,
            m.t,
            m.policy.name(),
            m.rounds,
            m.outcome.name()
        );
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TraceParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(TraceParseError::MissingHeader)?;
        let header = header
            .strip_prefix('#')
            .ok_or(TraceParseError::MissingHeader)?;
        let meta = parse_header(header).map_err(|msg| TraceParseError::Line {
            line: hline + 1,
            msg,
        })?;
        let mut trace = Trace::new(meta);
        for (idx, line) in lines {
            let ev =
                parse_event(line).map_err(|msg| TraceParseError::Line { line: idx + 1, msg })?;
            trace.events.push(ev);
        }
        Ok(trace)
    }
}

fn fields(line: &str) -> impl Iterator<Item = Result<(&str, &str), String>> {
    line.split_whitespace().map(|tok| {
        tok.split_once('=')
            .ok_or_else(|| format!("expected key=value, got {tok:?}"))
    })
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("{key}={v}: {e}"))
}

fn parse_header(line: &str) -> Result<TraceMeta, String> {
    let (mut n, mut head, mut alg, mut t, mut policy, mut rounds, mut outcome) =
        (None, None, None, None, None, None, None);
    for kv in fields(line) {
        let (k, v) = kv?;
        match k {
            "n" => n = Some(num(k, v)?),
            "head" => head = Some(num(k, v)?),
            "algorithm" => alg = Some(v.parse()?),
            "T" => t = Some(num(k, v)?),
            "policy" => policy = Some(v.parse()?),
            "rounds" => rounds = Some(num(k, v)?),
            "outcome" => outcome = Some(v.parse()?),
            other => return Err(format!("unknown header key {other:?}")),
        }
    }
    let missing = |k: &str| format!("header lacks {k}");
    Ok(TraceMeta {
        n: n.ok_or_else(|| missing("n"))?,
        head: head.unwrap_or(0),
        algorithm: alg.ok_or_else(|| missing("algorithm"))?,
        t: t.unwrap_or(1),
        policy: policy.unwrap_or_default(),
        rounds: rounds.ok_or_else(|| missing("rounds"))?,
        outcome: outcome.ok_or_else(|| missing("outcome"))?,
    })
}

fn parse_event(line: &str) -> Result<TraceEvent, String> {
    let (mut round, mut kind, mut node, mut payload) = (None, None, None, None);
    for kv in fields(line) {
        let (k, v) = kv?;
        match k {
            "round" => round = Some(num::<Round>(k, v)?),
            "kind" => kind = Some(v),
            "node" => node = Some(num::<NodeId>(k, v)?),
            "payload" => payload = Some(v),
            other => return Err(format!("unknown field {other:?}")),
        }
    }
    let kind = kind.ok_or("missing kind")?;
    Ok(TraceEvent {
        round: round.ok_or("missing round")?,
        node: node.ok_or("missing node")?,
        event: Event::parse(kind, payload.ok_or("missing payload")?)?,
    })
}
