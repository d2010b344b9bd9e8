use std::fmt::Write as _;

use thiserror::Error;

use super::block::{Block, BlockKind};
use super::hash::{sha256, Hash32};
use super::identity::NodeId;
use super::ledger::Chain;
use crate::codec::Encoder;
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenesisError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("roster is empty")]
    EmptyRoster,
    #[error("duplicate public key for `{0}`")]
    DuplicateNode(String),
}

/// Network configuration from which the genesis block is derived.
///
/// Text form, one `key = value` per line, `#` comments allowed:
///
/// ```text
/// network_id = pot-golden
/// turn = 60
/// transition = 5
/// node = alice 0101..01
/// node = bob   0202..02
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenesisConfig {
    pub network_id: String,
    pub turn_duration: Tick,
    pub transition_duration: Tick,
    pub roster: Vec<NodeId>,
}

impl GenesisConfig {
    pub fn parse(text: &str) -> Result<Self, GenesisError> {
        let mut network_id = None;
        let mut turn = None;
        let mut transition = None;
        let mut roster: Vec<NodeId> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| GenesisError::Parse {
                line: line_no,
                reason: reason.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "network_id" => network_id = Some(value.to_string()),
                "turn" => {
                    turn = Some(
                        value
                            .parse::<Tick>()
                            .map_err(|_| err("turn must be an integer"))?,
                    )
                }
                "transition" => {
                    transition = Some(
                        value
                            .parse::<Tick>()
                            .map_err(|_| err("transition must be an integer"))?,
                    )
                }
                "node" => {
                    let mut parts = value.split_whitespace();
                    let (Some(label), Some(pk), None) = (parts.next(), parts.next(), parts.next())
                    else {
                        return Err(err("node needs `label hexkey`"));
                    };
                    let mut key = [0u8; 32];
                    hex::decode_to_slice(pk, &mut key)
                        .map_err(|_| err("public key must be 64 hex digits"))?;
                    let id = NodeId::new(label, key);
                    if roster.contains(&id) {
                        return Err(GenesisError::DuplicateNode(label.to_string()));
                    }
                    roster.push(id);
                }
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        if roster.is_empty() {
            return Err(GenesisError::EmptyRoster);
        }
        Ok(GenesisConfig {
            network_id: network_id.ok_or(GenesisError::Missing("network_id"))?,
            turn_duration: turn.ok_or(GenesisError::Missing("turn"))?,
            transition_duration: transition.ok_or(GenesisError::Missing("transition"))?,
            roster,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "network_id = {}", self.network_id);
        let _ = writeln!(s, "turn = {}", self.turn_duration);
        let _ = writeln!(s, "transition = {}", self.transition_duration);
        for n in &self.roster {
            let _ = writeln!(s, "node = {} {}", n.label, hex::encode(n.public_key));
        }
        s
    }

    /// Digest of the configuration; the genesis block records it as `prev_hash`.
    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.raw(b"POT-GENESIS")
            .bytes(self.network_id.as_bytes())
            .u64(self.turn_duration)
            .u64(self.transition_duration)
            .u64(self.roster.len() as u64);
        for n in &self.roster {
            n.encode(&mut e);
        }
        sha256(&e.finish())
    }

    pub fn genesis_block(&self) -> Block {
        Block::new(
            0,
            self.digest(),
            NodeId::new("genesis", [0; 32]),
            0,
            0,
            BlockKind::Genesis,
            Vec::new(),
        )
    }

    /// The predetermined genesis hash every node derives from the config.
    pub fn genesis_hash(&self) -> Hash32 {
        self.genesis_block().hash()
    }

    pub fn chain(&self) -> Chain {
        Chain::new(self.genesis_block()).expect("derived genesis is well formed")
    }
}
