//! Request arrival schedules: sequential, one-shot concurrent, dynamic
//! windows, and steady per-cycle arrivals.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::dyngraph::{stream, NodeId, Round};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Each request is issued right after the previous one is fully served.
    Sequential,
    /// Everything at round 0.
    Concurrent,
    /// Initiation rounds uniform in `[0, window)`.
    Dynamic { window: Round, seed: u64 },
    /// `rate` new requests at the start of every cycle until `k` are issued.
    Continuous { rate: usize },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Sequential => "sequential",
            ScheduleKind::Concurrent => "concurrent",
            ScheduleKind::Dynamic { .. } => "dynamic",
            ScheduleKind::Continuous { .. } => "continuous",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Dynamic { window, seed } => write!(f, "dynamic({window},{seed})"),
            ScheduleKind::Continuous { rate } => write!(f, "continuous({rate})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("unknown schedule {s:?}");
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(bad)?;
                let args: Result<Vec<u64>, _> =
                    inner.split(',').map(|a| a.trim().parse::<u64>()).collect();
                (name, args.map_err(|_| bad())?)
            }
            None => (s, Vec::new()),
        };
        match (name, args.as_slice()) {
            ("sequential", []) => Ok(ScheduleKind::Sequential),
            ("concurrent", []) => Ok(ScheduleKind::Concurrent),
            ("dynamic", [window, seed]) => Ok(ScheduleKind::Dynamic {
                window: *window,
                seed: *seed,
            }),
            ("continuous", [rate]) if *rate >= 1 => Ok(ScheduleKind::Continuous {
                rate: *rate as usize,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Arrival {
    pub init_round: Round,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("{k} requests need {k} distinct non-head issuers but only {available} exist")]
    TooManyRequests { k: usize, available: usize },
}

/// Arrivals released so far plus, for sequential runs, the issuers still
/// waiting for their predecessor to finish.
#[derive(Clone, Debug)]
pub struct Schedule {
    kind: ScheduleKind,
    released: Vec<Arrival>,
    waiting: VecDeque<NodeId>,
    cursor: usize,
}

/// Builds the schedule for `k` requests on `n` nodes. Issuers are a
/// seed-determined sample of distinct nodes other than `head`;
/// `cycle_len` places continuous arrivals.
pub fn make_schedule(
    kind: ScheduleKind,
    n: usize,
    k: usize,
    head: NodeId,
    seed: u64,
    cycle_len: Round,
) -> Result<Schedule, WorkloadError> {
    let available = n.saturating_sub(1);
    if k > available {
        return Err(WorkloadError::TooManyRequests { k, available });
    }
    let mut issuers: Vec<NodeId> = (0..n).filter(|&u| u != head).collect();
    issuers.shuffle(&mut stream(seed, 10, 0));
    issuers.truncate(k);

    let mut waiting = VecDeque::new();
    let mut released: Vec<Arrival> = match kind {
        ScheduleKind::Sequential => {
            waiting.extend(issuers.iter().skip(1).copied());
            issuers
                .first()
                .map(|&node| Arrival {
                    init_round: 0,
                    node,
                })
                .into_iter()
                .collect()
        }
        ScheduleKind::Concurrent => issuers
            .iter()
            .map(|&node| Arrival {
                init_round: 0,
                node,
            })
            .collect(),
        ScheduleKind::Dynamic { window, seed } => {
            let mut rng = stream(seed, 11, 0);
            issuers
                .iter()
                .map(|&node| Arrival {
                    init_round: if window == 0 {
                        0
                    } else {
                        rng.gen_range(0..window)
                    },
                    node,
                })
                .collect()
        }
        ScheduleKind::Continuous { rate } => issuers
            .iter()
            .enumerate()
            .map(|(i, &node)| Arrival {
                init_round: (i / rate.max(1)) as Round * cycle_len,
                node,
            })
            .collect(),
    };
    released.sort();
    Ok(Schedule {
        kind,
        released,
        waiting,
        cursor: 0,
    })
}

impl Schedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Arrivals whose initiation round is `round`, in schedule order.
    pub fn due(&mut self, round: Round) -> Vec<Arrival> {
        let start = self.cursor;
        while self.cursor < self.released.len() && self.released[self.cursor].init_round <= round {
            self.cursor += 1;
        }
        self.released[start..self.cursor].to_vec()
    }

    /// A sequential schedule releases its next request at the first round
    /// after the latest one was fully served.
    pub fn notify_completion(&mut self, issuer: NodeId, next_round: Round) {
        if self.kind != ScheduleKind::Sequential {
            return;
        }
        if self.released.last().map(|a| a.node) != Some(issuer) {
            return;
        }
        if let Some(node) = self.waiting.pop_front() {
            self.released.push(Arrival {
                init_round: next_round,
                node,
            });
        }
    }

    pub fn released(&self) -> &[Arrival] {
        &self.released
    }

    /// Every issuer, whether released yet or not.
    pub fn issuers(&self) -> Vec<NodeId> {
        self.released
            .iter()
            .map(|a| a.node)
            .chain(self.waiting.iter().copied())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.released.len() + self.waiting.len()
    }

    /// No request is waiting to be released or injected.
    pub fn exhausted(&self) -> bool {
        self.waiting.is_empty() && self.cursor == self.released.len()
    }

    pub fn to_text(&self) -> String {
        self.released
            .iter()
            .map(|a| format!("init={} node={}\n", a.init_round, a.node))
            .collect()
    }
}
