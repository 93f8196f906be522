//! Per-round communication graphs, adversary strategies and connectivity checks.
//!
//! A dynamic network is a fixed vertex set `0..n` plus one edge set per
//! round. Every edge set the adversary hands out must be connected; the
//! stronger T-interval property is checked separately over a whole
//! [`GraphTrace`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{Message, QueueRequest, SuccValue};

pub type NodeId = usize;
pub type Round = u64;

/// An undirected edge stored with its endpoints in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(NodeId, NodeId);

impl Edge {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        if u <= v {
            Edge(u, v)
        } else {
            Edge(v, u)
        }
    }

    pub fn lo(self) -> NodeId {
        self.0
    }

    pub fn hi(self) -> NodeId {
        self.1
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// The edge set chosen by the adversary for a single round.
///
/// Edges are kept as given (normalized and sorted) so that duplicates and
/// self-loops survive construction and can be reported by
/// [`validate_round_graph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundGraph {
    pub n: usize,
    pub round: Round,
    pub edges: Vec<Edge>,
}

impl RoundGraph {
    pub fn new(n: usize, round: Round, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut edges: Vec<Edge> = pairs.into_iter().map(|(u, v)| Edge::new(u, v)).collect();
        edges.sort_unstable();
        RoundGraph { n, round, edges }
    }

    pub fn complete(n: usize, round: Round) -> Self {
        let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        RoundGraph::new(n, round, pairs)
    }

    /// Adjacency lists, ascending. Out-of-range endpoints are skipped.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if e.hi() < self.n && e.lo() != e.hi() {
                adj[e.lo()].push(e.hi());
                adj[e.hi()].push(e.lo());
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.lo() == u && e.hi() != u {
                    Some(e.hi())
                } else if e.hi() == u && e.lo() != u {
                    Some(e.lo())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.binary_search(&Edge::new(u, v)).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphViolation {
    #[error("graph has no vertices")]
    Empty,
    #[error("malformed edge {u}-{v}: {reason}")]
    MalformedEdge {
        u: NodeId,
        v: NodeId,
        reason: &'static str,
    },
    #[error("graph is disconnected; unreachable from node 0: {unreachable:?}")]
    Disconnected { unreachable: Vec<NodeId> },
}

/// Checks that `g` is a simple, undirected, connected graph on `0..n`.
pub fn validate_round_graph(g: &RoundGraph) -> Result<(), GraphViolation> {
    if g.n == 0 {
        return Err(GraphViolation::Empty);
    }
    let mut seen = BTreeSet::new();
    for e in &g.edges {
        let (u, v) = (e.lo(), e.hi());
        if v >= g.n {
            return Err(GraphViolation::MalformedEdge {
                u,
                v,
                reason: "endpoint out of range",
            });
        }
        if u == v {
            return Err(GraphViolation::MalformedEdge {
                u,
                v,
                reason: "self-loop",
            });
        }
        if !seen.insert(*e) {
            return Err(GraphViolation::MalformedEdge {
                u,
                v,
                reason: "duplicate edge",
            });
        }
    }
    let unreachable = unreachable_from_zero(g.n, &g.adjacency());
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(GraphViolation::Disconnected { unreachable })
    }
}

fn unreachable_from_zero(n: usize, adj: &[Vec<NodeId>]) -> Vec<NodeId> {
    let dist = bfs(adj, 0);
    (0..n).filter(|&v| dist[v].is_none()).collect()
}

fn bfs(adj: &[Vec<NodeId>], src: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn connected(n: usize, edges: impl IntoIterator<Item = Edge>) -> bool {
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.lo()].push(e.hi());
        adj[e.hi()].push(e.lo());
    }
    unreachable_from_zero(n, &adj).is_empty()
}

/// Shortest-path hop count between `u` and `v` in `g`.
///
/// # Panics
///
/// Panics if `v` is not reachable from `u`, which cannot happen on a graph
/// that passed [`validate_round_graph`].
pub fn hop_dist(g: &RoundGraph, u: NodeId, v: NodeId) -> usize {
    bfs(&g.adjacency(), u)[v].expect("round graphs are connected")
}

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("round {round} is invalid: {source}")]
    Invalid {
        round: Round,
        #[source]
        source: GraphViolation,
    },
}

/// The full sequence of round graphs of one execution, starting at round 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphTrace {
    pub n: usize,
    rounds: Vec<RoundGraph>,
}

impl GraphTrace {
    pub fn new(n: usize) -> Self {
        GraphTrace {
            n,
            rounds: Vec::new(),
        }
    }

    /// Appends the next round, which must carry the next consecutive index
    /// and be a valid connected graph on the same vertex set.
    pub fn push(&mut self, g: RoundGraph) -> Result<(), GraphViolation> {
        assert_eq!(g.n, self.n, "vertex set is fixed for the whole trace");
        assert_eq!(
            g.round,
            self.rounds.len() as Round,
            "rounds must be consecutive"
        );
        validate_round_graph(&g)?;
        self.rounds.push(g);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[RoundGraph] {
        &self.rounds
    }

    pub fn get(&self, round: Round) -> Option<&RoundGraph> {
        self.rounds.get(round as usize)
    }

    /// Line-oriented text form: a `n=<n> rounds=<r>` header followed by one
    /// `r=<i>: u-v,u-v,...` line per round with edges sorted.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} rounds={}\n", self.n, self.rounds.len());
        for g in &self.rounds {
            out.push_str(&format!("r={}:", g.round));
            if !g.edges.is_empty() {
                out.push(' ');
                let edges: Vec<String> = g.edges.iter().map(Edge::to_string).collect();
                out.push_str(&edges.join(","));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TraceFormatError> {
        let err = |line: usize, msg: &str| TraceFormatError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let mut n = None;
        let mut count = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("rounds", v)) => count = v.parse::<usize>().ok(),
                _ => return Err(err(1, "bad header field")),
            }
        }
        let n = n.ok_or_else(|| err(1, "header lacks n"))?;
        let count = count.ok_or_else(|| err(1, "header lacks rounds"))?;
        let mut trace = GraphTrace::new(n);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let rest = line
                .strip_prefix("r=")
                .ok_or_else(|| err(lineno, "expected r=<round>:"))?;
            let (round, edges) = rest
                .split_once(':')
                .ok_or_else(|| err(lineno, "missing ':'"))?;
            let round: Round = round.parse().map_err(|_| err(lineno, "bad round index"))?;
            if round != trace.len() as Round {
                return Err(err(lineno, "rounds must be consecutive from 0"));
            }
            let mut pairs = Vec::new();
            for tok in edges.trim().split(',').filter(|t| !t.is_empty()) {
                let (u, v) = tok.split_once('-').ok_or_else(|| err(lineno, "bad edge"))?;
                let u = u.parse().map_err(|_| err(lineno, "bad endpoint"))?;
                let v = v.parse().map_err(|_| err(lineno, "bad endpoint"))?;
                pairs.push((u, v));
            }
            let g = RoundGraph::new(n, round, pairs);
            trace
                .push(g)
                .map_err(|source| TraceFormatError::Invalid { round, source })?;
        }
        if trace.len() != count {
            return Err(err(1, "round count does not match header"));
        }
        Ok(trace)
    }
}

fn window_connected(n: usize, window: &[RoundGraph]) -> bool {
    let mut common: BTreeSet<Edge> = window[0].edges.iter().copied().collect();
    for g in &window[1..] {
        let next: BTreeSet<Edge> = g.edges.iter().copied().collect();
        common = common.intersection(&next).copied().collect();
    }
    connected(n, common)
}

/// True iff every window of `t` consecutive rounds inside the trace has a
/// connected common edge set. Windows running past the end are not checked.
pub fn check_t_interval(trace: &GraphTrace, t: usize) -> bool {
    assert!(t >= 1, "interval length must be positive");
    if trace.len() < t {
        return true;
    }
    trace
        .rounds
        .windows(t)
        .all(|w| window_connected(trace.n, w))
}

/// Like [`check_t_interval`] but only over windows starting at multiples of
/// `t`; trailing partial windows are checked on what exists.
pub fn check_t_interval_aligned(trace: &GraphTrace, t: usize) -> bool {
    assert!(t >= 1, "interval length must be positive");
    trace.rounds.chunks(t).all(|w| window_connected(trace.n, w))
}

/// Which adversary picks the edge sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryKind {
    StaticComplete,
    ObliviousRandom { seed: u64 },
    TStable { t: usize, seed: u64 },
    AdaptiveLine,
    Trap,
}

impl AdversaryKind {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, AdversaryKind::AdaptiveLine | AdversaryKind::Trap)
    }

    /// Short name used in CSV rows.
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::StaticComplete => "static_complete",
            AdversaryKind::ObliviousRandom { .. } => "oblivious_random",
            AdversaryKind::TStable { .. } => "tstable",
            AdversaryKind::AdaptiveLine => "adaptive_line",
            AdversaryKind::Trap => "trap",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryKind::ObliviousRandom { seed } => write!(f, "oblivious_random({seed})"),
            AdversaryKind::TStable { t, seed } => write!(f, "tstable({t},{seed})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let args = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unbalanced parentheses in {s:?}"))?;
                let parsed: Result<Vec<u64>, _> =
                    args.split(',').map(|a| a.trim().parse::<u64>()).collect();
                (name, parsed.map_err(|_| format!("bad arguments in {s:?}"))?)
            }
            None => (s, Vec::new()),
        };
        match (name, args.as_slice()) {
            ("static_complete", []) => Ok(AdversaryKind::StaticComplete),
            ("oblivious_random", [seed]) => Ok(AdversaryKind::ObliviousRandom { seed: *seed }),
            ("tstable", [t, seed]) if *t >= 1 => Ok(AdversaryKind::TStable {
                t: *t as usize,
                seed: *seed,
            }),
            ("adaptive_line", []) => Ok(AdversaryKind::AdaptiveLine),
            ("trap", []) => Ok(AdversaryKind::Trap),
            _ => Err(format!("unknown adversary {s:?}")),
        }
    }
}

/// What an adaptive adversary observes before fixing the edges of a round:
/// the message every node is about to broadcast and every node's
/// successor variable.
#[derive(Clone, Copy, Debug)]
pub struct AdversaryView<'a> {
    pub pending: &'a [Message],
    pub succ: &'a [SuccValue],
}

impl AdversaryView<'_> {
    fn tails(&self) -> Vec<NodeId> {
        (0..self.succ.len())
            .filter(|&u| self.succ[u] == SuccValue::Bottom)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("adaptive adversary {0} needs the pending messages of the round")]
    AdaptivityUnavailable(&'static str),
    #[error("adversary asked for round {asked} but history has {have} rounds")]
    OutOfOrder { asked: Round, have: usize },
}

/// An adversary instance: a kind plus the graph-generation parameters.
///
/// Edge choices are a pure function of `(kind, edge_prob, round, view)`;
/// random kinds derive an independent stream per round (or per window)
/// from their seed, so instances never carry hidden state.
#[derive(Clone, Debug)]
pub struct Adversary {
    pub kind: AdversaryKind,
    pub n: usize,
    /// Probability of each non-tree pair being added on top of the random
    /// spanning tree. Zero keeps the sparsest connected graph.
    pub edge_prob: f64,
}

impl Adversary {
    pub fn new(kind: AdversaryKind, n: usize) -> Self {
        Adversary {
            kind,
            n,
            edge_prob: 0.0,
        }
    }

    pub fn with_edge_prob(mut self, p: f64) -> Self {
        self.edge_prob = p;
        self
    }

    /// Chooses the edge set for `round`. `history` must hold exactly the
    /// rounds before it; adaptive kinds require `view`.
    pub fn next_edges(
        &self,
        history: &GraphTrace,
        view: Option<AdversaryView<'_>>,
        round: Round,
    ) -> Result<RoundGraph, AdversaryError> {
        if round != history.len() as Round {
            return Err(AdversaryError::OutOfOrder {
                asked: round,
                have: history.len(),
            });
        }
        let n = self.n;
        let g = match self.kind {
            AdversaryKind::StaticComplete => RoundGraph::complete(n, round),
            AdversaryKind::ObliviousRandom { seed } => {
                let mut rng = stream(seed, 1, round);
                let mut edges = random_spanning_tree(n, &mut rng);
                add_random_extras(n, &mut edges, self.edge_prob, &mut rng);
                RoundGraph::new(n, round, edges.into_iter().map(|e| (e.lo(), e.hi())))
            }
            AdversaryKind::TStable { t, seed } => {
                let window = round / t as Round;
                let mut tree_rng = stream(seed, 2, window);
                let mut edges = random_spanning_tree(n, &mut tree_rng);
                let mut extra_rng = stream(seed, 3, round);
                add_random_extras(n, &mut edges, self.edge_prob, &mut extra_rng);
                RoundGraph::new(n, round, edges.into_iter().map(|e| (e.lo(), e.hi())))
            }
            AdversaryKind::AdaptiveLine => {
                let view = view.ok_or(AdversaryError::AdaptivityUnavailable("adaptive_line"))?;
                let order = adaptive_line_order(n, &view);
                RoundGraph::new(n, round, order.windows(2).map(|w| (w[0], w[1])))
            }
            AdversaryKind::Trap => {
                let view = view.ok_or(AdversaryError::AdaptivityUnavailable("trap"))?;
                trap_graph(n, round, &view)
            }
        };
        Ok(g)
    }
}

/// Free-function form of [`Adversary::next_edges`] with default parameters.
pub fn adversary_next_edges(
    kind: AdversaryKind,
    history: &GraphTrace,
    view: Option<AdversaryView<'_>>,
    round: Round,
) -> Result<RoundGraph, AdversaryError> {
    Adversary::new(kind, history.n).next_edges(history, view, round)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for (seed, purpose, index).
pub(crate) fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose)));
    rng.set_stream(index);
    rng
}

/// Random spanning tree by randomized growth: nodes are visited in a random
/// order and each attaches to a uniformly chosen earlier node.
pub fn random_spanning_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Edge> {
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    (1..n)
        .map(|i| Edge::new(order[i], order[rng.gen_range(0..i)]))
        .collect()
}

fn add_random_extras<R: Rng + ?Sized>(n: usize, edges: &mut Vec<Edge>, p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    let present: BTreeSet<Edge> = edges.iter().copied().collect();
    for u in 0..n {
        for v in u + 1..n {
            let e = Edge::new(u, v);
            if !present.contains(&e) && rng.gen_bool(p.min(1.0)) {
                edges.push(e);
            }
        }
    }
}

/// Holders of the smallest pending QUEUE message first (ascending UID), the
/// tail last, everyone else in between. Without QUEUE traffic the same
/// arrangement is applied to the smallest CANCEL message and its target.
fn adaptive_line_order(n: usize, view: &AdversaryView<'_>) -> Vec<NodeId> {
    let min_queue = view
        .pending
        .iter()
        .filter_map(|m| match m {
            Message::Queue(q) => Some(*q),
            _ => None,
        })
        .min();
    let (holders, far_end): (Vec<NodeId>, Option<NodeId>) = if let Some(q) = min_queue {
        let holders = (0..n)
            .filter(|&u| view.pending[u] == Message::Queue(q))
            .collect();
        (holders, view.tails().into_iter().next())
    } else if let Some(target) = view
        .pending
        .iter()
        .filter_map(|m| match m {
            Message::Cancel(t) => Some(*t),
            _ => None,
        })
        .min()
    {
        let holders = (0..n)
            .filter(|&u| view.pending[u] == Message::Cancel(target))
            .collect();
        (holders, Some(target))
    } else {
        (Vec::new(), None)
    };
    let mut order = holders.clone();
    for u in 0..n {
        if !holders.contains(&u) && Some(u) != far_end {
            order.push(u);
        }
    }
    if let Some(t) = far_end {
        if !holders.contains(&t) {
            order.push(t);
        }
    }
    order
}

/// Isolates the single holder of a QUEUE message so that it can only talk
/// to one fixed partner: the origin when someone else holds it, or a fixed
/// escort (lowest UID that is neither origin nor tail) when the origin
/// holds it. Falls back to the complete graph otherwise.
fn trap_graph(n: usize, round: Round, view: &AdversaryView<'_>) -> RoundGraph {
    let holders: Vec<(NodeId, QueueRequest)> = view
        .pending
        .iter()
        .enumerate()
        .filter_map(|(u, m)| match m {
            Message::Queue(q) => Some((u, *q)),
            _ => None,
        })
        .collect();
    let [(holder, req)] = holders.as_slice() else {
        return RoundGraph::complete(n, round);
    };
    let origin = req.origin;
    let partner = if *holder != origin {
        Some(origin)
    } else {
        let tails = view.tails();
        (0..n).find(|&u| u != origin && !tails.contains(&u))
    };
    let Some(partner) = partner else {
        return RoundGraph::complete(n, round);
    };
    // holder - partner, partner - everyone else
    let mut pairs = vec![(*holder, partner)];
    pairs.extend(
        (0..n)
            .filter(|&u| u != *holder && u != partner)
            .map(|u| (partner, u)),
    );
    RoundGraph::new(n, round, pairs)
}
