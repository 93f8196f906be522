//! Scenario configuration and its flat `key = value` text form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dyngraph::{AdversaryKind, NodeId, Round};
use crate::protocol::EnqueuePolicy;
use crate::workload::ScheduleKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Search + cancelation cycles, for 1-interval connected graphs.
    Alg1,
    /// Pipelined periods, for T-interval connected graphs.
    Alg2,
    /// Single-copy forwarding without replication.
    NoRep,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::NoRep => "norep",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alg1" => Ok(Algorithm::Alg1),
            "alg2" => Ok(Algorithm::Alg2),
            "norep" => Ok(Algorithm::NoRep),
            _ => Err(format!("unknown algorithm {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Termination {
    /// Stop as soon as every scheduled request is served and a tail exists.
    #[default]
    OracleStop,
    /// Quiet tails flood TERMINATE; stop once every node holds it.
    IdleDetect,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::OracleStop => "oracle_stop",
            Termination::IdleDetect => "idle_detect",
        }
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle_stop" => Ok(Termination::OracleStop),
            "idle_detect" => Ok(Termination::IdleDetect),
            _ => Err(format!("unknown termination {s:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("bad value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "k",
    "algorithm",
    "T",
    "adversary",
    "schedule",
    "policy",
    "head",
    "horizon",
    "seed",
    "termination",
    "edge_prob",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    pub t: usize,
    pub adversary: AdversaryKind,
    pub schedule: ScheduleKind,
    pub policy: EnqueuePolicy,
    pub head: NodeId,
    /// `None` picks a generous multiple of the proven bound.
    pub horizon: Option<Round>,
    pub seed: u64,
    pub termination: Termination,
    pub edge_prob: f64,
}

impl ScenarioConfig {
    pub fn new(n: usize, k: usize, algorithm: Algorithm) -> Self {
        ScenarioConfig {
            n,
            k,
            algorithm,
            t: 1,
            adversary: AdversaryKind::StaticComplete,
            schedule: ScheduleKind::Concurrent,
            policy: EnqueuePolicy::default(),
            head: 0,
            horizon: None,
            seed: 0,
            termination: Termination::default(),
            edge_prob: 0.0,
        }
    }

    /// Rounds per cycle, or `None` for the unstructured baseline.
    pub fn cycle_len(&self) -> Option<Round> {
        cycle_len(self.algorithm, self.n, self.t)
    }

    pub fn horizon(&self) -> Round {
        if let Some(h) = self.horizon {
            return h;
        }
        let n = self.n as Round;
        let k = self.k.max(1) as Round;
        let window = match self.schedule {
            ScheduleKind::Dynamic { window, .. } => window,
            _ => 0,
        };
        match self.algorithm {
            Algorithm::NoRep => 10 * n * n,
            Algorithm::Alg1 => 10 * n * k + window,
            Algorithm::Alg2 => 5 * k * self.cycle_len().unwrap_or(2 * n) + window,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.head >= self.n {
            return bad(format!(
                "head {} is not a node of an {}-node network",
                self.head, self.n
            ));
        }
        if self.k > self.n - 1 {
            return bad(format!(
                "k={} exceeds n-1={} (the head does not issue)",
                self.k,
                self.n - 1
            ));
        }
        if self.horizon == Some(0) {
            return bad("horizon must be at least 1".into());
        }
        if self.t == 0 {
            return bad("T must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return bad("edge_prob must lie in [0, 1]".into());
        }
        if let AdversaryKind::TStable { t: 0, .. } = self.adversary {
            return bad("tstable window must be at least 1".into());
        }
        if self.adversary == AdversaryKind::Trap && (self.k > 1 || self.n < 3) {
            return bad("trap tracks a single request and needs n >= 3".into());
        }
        if self.algorithm == Algorithm::NoRep && self.k > 1 {
            return bad("the no-replication baseline carries a single request".into());
        }
        if self.termination == Termination::IdleDetect && self.algorithm != Algorithm::Alg1 {
            return bad("idle_detect termination is defined for alg1 only".into());
        }
        Ok(())
    }

    /// Parses a config file body. Lines are `key = value`; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_map(&parse_pairs(text)?)
    }

    /// Builds a config from raw key/value pairs. Bare `tstable` and
    /// `oblivious_random` adversaries take their parameters from `T` and
    /// `seed` (tstable uses a window of `2T`).
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        if let Some(key) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        fn get<T: FromStr>(
            map: &BTreeMap<String, String>,
            key: &'static str,
        ) -> Result<Option<T>, ConfigError>
        where
            T::Err: fmt::Display,
        {
            map.get(key)
                .map(|v| {
                    v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                        key: key.to_string(),
                        reason: format!("{v:?}: {e}"),
                    })
                })
                .transpose()
        }
        let n: usize = get(map, "n")?.ok_or(ConfigError::MissingKey("n"))?;
        let k: usize = get(map, "k")?.ok_or(ConfigError::MissingKey("k"))?;
        let algorithm: Algorithm =
            get(map, "algorithm")?.ok_or(ConfigError::MissingKey("algorithm"))?;
        let t: usize = get(map, "T")?.unwrap_or(1);
        let seed: u64 = get(map, "seed")?.unwrap_or(0);
        let raw_adv = map
            .get("adversary")
            .ok_or(ConfigError::MissingKey("adversary"))?;
        let adversary = match raw_adv.trim() {
            "tstable" => AdversaryKind::TStable { t: 2 * t, seed },
            "oblivious_random" => AdversaryKind::ObliviousRandom { seed },
            other => other
                .parse()
                .map_err(|e: String| ConfigError::InvalidValue {
                    key: "adversary".into(),
                    reason: e,
                })?,
        };
        let schedule: ScheduleKind =
            get(map, "schedule")?.ok_or(ConfigError::MissingKey("schedule"))?;
        let cfg = ScenarioConfig {
            n,
            k,
            algorithm,
            t,
            adversary,
            schedule,
            policy: get(map, "policy")?.unwrap_or_default(),
            head: get(map, "head")?.unwrap_or(0),
            horizon: get(map, "horizon")?,
            seed,
            termination: get(map, "termination")?.unwrap_or_default(),
            edge_prob: get(map, "edge_prob")?.unwrap_or(0.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("n", self.n.to_string());
        line("k", self.k.to_string());
        line("algorithm", self.algorithm.to_string());
        line("T", self.t.to_string());
        line("adversary", self.adversary.to_string());
        line("schedule", self.schedule.to_string());
        line("policy", self.policy.name().to_string());
        line("head", self.head.to_string());
        if let Some(h) = self.horizon {
            line("horizon", h.to_string());
        }
        line("seed", self.seed.to_string());
        line("termination", self.termination.name().to_string());
        line("edge_prob", self.edge_prob.to_string());
        out
    }
}

pub fn cycle_len(algorithm: Algorithm, n: usize, t: usize) -> Option<Round> {
    match algorithm {
        Algorithm::Alg1 => Some(2 * n as Round),
        Algorithm::Alg2 => Some(2 * t as Round * n.div_ceil(t) as Round),
        Algorithm::NoRep => None,
    }
}

/// Splits `key = value` lines into a map; later keys win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: idx + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: idx + 1 });
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}
