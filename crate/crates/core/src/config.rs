//! Simulator configuration as flat `key = value` text.
//!
//! Every key can also be set programmatically with [`SimConfig::set`], which
//! is what command-line flags use, so precedence is simply the order in
//! which values are applied: defaults, then file, then flags.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::consensus::{parse_fraction, Fraction};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeeringMode {
    Pull,
    Push,
    Mixed,
}

impl fmt::Display for PeeringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeeringMode::Pull => "pull",
            PeeringMode::Push => "push",
            PeeringMode::Mixed => "mixed",
        })
    }
}

impl FromStr for PeeringMode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "pull" => Ok(PeeringMode::Pull),
            "push" => Ok(PeeringMode::Push),
            "mixed" => Ok(PeeringMode::Mixed),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    None,
    Prune,
    Child,
    Meta,
}

impl fmt::Display for StorageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorageMode::None => "none",
            StorageMode::Prune => "prune",
            StorageMode::Child => "child",
            StorageMode::Meta => "meta",
        })
    }
}

impl FromStr for StorageMode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "none" => Ok(StorageMode::None),
            "prune" => Ok(StorageMode::Prune),
            "child" => Ok(StorageMode::Child),
            "meta" => Ok(StorageMode::Meta),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub nodes: usize,
    pub turn: Tick,
    pub transition: Tick,
    pub seed: u64,
    /// Upper bound of the per-link delay; each link draws once from
    /// `1..=latency`.
    pub latency: Tick,
    pub peering: PeeringMode,
    pub theta: Fraction,
    pub storage: StorageMode,
    pub scenario: Option<String>,
    /// Run length in rounds of the initial roster.
    pub rounds: u64,
    /// Extra ticks granted to a leader that has not written by mid-turn;
    /// 0 disables the grace.
    pub grace: Tick,
    /// Consecutive turns without a block before the network votes a reset.
    pub stall_turns: u64,
    /// Consecutive missed turns after which a node counts as inactive.
    pub activity_window: u64,
    pub tx_size: u64,
    /// Untidy bytes that trigger a prune.
    pub prune_cap: u64,
    /// Extra never-revealed bloat per block from a flooding node.
    pub flood_txs: usize,
    pub meta_tail: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodes: 8,
            turn: 20,
            transition: 5,
            seed: 1,
            latency: 2,
            peering: PeeringMode::Push,
            theta: Fraction::new(1, 2),
            storage: StorageMode::None,
            scenario: None,
            rounds: 4,
            grace: 0,
            stall_turns: 3,
            activity_window: 2,
            tx_size: 128,
            prune_cap: 8192,
            flood_txs: 16,
            meta_tail: 2,
        }
    }
}

pub const CONFIG_KEYS: [&str; 17] = [
    "nodes",
    "turn",
    "transition",
    "seed",
    "latency",
    "peering",
    "theta",
    "storage",
    "scenario",
    "rounds",
    "grace",
    "stall_turns",
    "activity_window",
    "tx_size",
    "prune_cap",
    "flood_txs",
    "meta_tail",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl SimConfig {
    /// Apply one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "nodes" => self.nodes = num(key, value)?,
            "turn" => self.turn = num(key, value)?,
            "transition" => self.transition = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "latency" => self.latency = num(key, value)?,
            "peering" => self.peering = value.parse().map_err(|_| bad())?,
            "theta" => self.theta = parse_fraction(value).ok_or_else(bad)?,
            "storage" => self.storage = value.parse().map_err(|_| bad())?,
            "scenario" => {
                self.scenario = (!value.is_empty()).then(|| value.to_string());
            }
            "rounds" => self.rounds = num(key, value)?,
            "grace" => self.grace = num(key, value)?,
            "stall_turns" => self.stall_turns = num(key, value)?,
            "activity_window" => self.activity_window = num(key, value)?,
            "tx_size" => self.tx_size = num(key, value)?,
            "prune_cap" => self.prune_cap = num(key, value)?,
            "flood_txs" => self.flood_txs = num(key, value)?,
            "meta_tail" => self.meta_tail = num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Apply a config file on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: i + 1,
                reason: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value).map_err(|e| match e {
                ConfigError::UnknownKey(_) | ConfigError::BadValue { .. } => ConfigError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = SimConfig::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "nodes" => self.nodes.to_string(),
            "turn" => self.turn.to_string(),
            "transition" => self.transition.to_string(),
            "seed" => self.seed.to_string(),
            "latency" => self.latency.to_string(),
            "peering" => self.peering.to_string(),
            "theta" => format!("{}/{}", self.theta.numer(), self.theta.denom()),
            "storage" => self.storage.to_string(),
            "scenario" => self.scenario.clone().unwrap_or_default(),
            "rounds" => self.rounds.to_string(),
            "grace" => self.grace.to_string(),
            "stall_turns" => self.stall_turns.to_string(),
            "activity_window" => self.activity_window.to_string(),
            "tx_size" => self.tx_size.to_string(),
            "prune_cap" => self.prune_cap.to_string(),
            "flood_txs" => self.flood_txs.to_string(),
            "meta_tail" => self.meta_tail.to_string(),
            _ => return None,
        })
    }

    /// Canonical text; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.nodes < 2 {
            return fail("at least two nodes are required");
        }
        if self.transition < 1 {
            return fail("transition must be at least one tick");
        }
        if self.turn <= self.transition {
            return fail("turn must be longer than the transition");
        }
        if self.latency < 1 {
            return fail("latency must be at least one tick");
        }
        if self.theta <= Fraction::from_integer(0) || self.theta > Fraction::from_integer(1) {
            return fail("theta must lie in (0, 1]");
        }
        if self.rounds == 0 {
            return fail("rounds must be positive");
        }
        if self.activity_window == 0 || self.stall_turns == 0 {
            return fail("activity_window and stall_turns must be positive");
        }
        if self.tx_size < 64 {
            return fail("tx_size must be at least 64 bytes");
        }
        Ok(())
    }

    /// Ticks simulated: `rounds` undisturbed rounds.
    pub fn horizon(&self) -> Tick {
        self.rounds * self.nodes as u64 * (self.turn + self.transition)
    }
}
