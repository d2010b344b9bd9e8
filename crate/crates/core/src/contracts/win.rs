use std::collections::BTreeMap;

use super::commit::{Commitment, RevealRegistry, RevealedData};
use super::dispute::{Dispute, DisputeReason};
use crate::chain::{Chain, Hash32, NodeId};

/// Upper-level game logic that replays disclosed moves.
pub trait GameReplay {
    fn replay(&self, revealed: &[RevealedData]) -> Result<(), String>;
}

/// Accepts any disclosed history.
pub struct NoReplay;

impl GameReplay for NoReplay {
    fn replay(&self, _: &[RevealedData]) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenyReason {
    Unrevealed(Vec<Hash32>),
    InvalidReveal(Vec<Hash32>),
    Replay(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Granted,
    /// Fraud is assumed; the dispute is opened against the claimant.
    Denied {
        reason: DenyReason,
        dispute: Dispute,
    },
}

/// Scan the chain for the claimant's commitments and reveals, check each
/// reveal independently, then replay the disclosed moves.
pub fn win_claim(claimant: &NodeId, chain: &Chain, replay: &dyn GameReplay, turn: u64) -> Verdict {
    let mut registry = RevealRegistry::new();
    let mut mine: Vec<Hash32> = Vec::new();
    let mut invalid = Vec::new();
    for (_, tx) in chain.transactions() {
        if tx.kind.is_commitment() && tx.author == *claimant {
            if let Some(c) = Commitment::from_tx(tx, 0, u64::MAX / 2) {
                mine.push(c.id);
                registry.register(c);
            }
        }
    }
    let mut revealed: BTreeMap<Hash32, RevealedData> = BTreeMap::new();
    for (_, tx) in chain.transactions() {
        if !tx.kind.is_reveal() {
            continue;
        }
        match registry.reveal_tx(tx, 0) {
            Ok(r) => {
                revealed.insert(r.commitment, r);
            }
            Err(super::commit::RevealError::Unknown(_))
            | Err(super::commit::RevealError::AlreadyRevealed(_)) => {}
            Err(_) => {
                if let Some((target, _)) = super::commit::RevealSecret::from_tx(tx) {
                    invalid.push(target);
                }
            }
        }
    }
    let deny = |reason| Verdict::Denied {
        reason,
        dispute: Dispute::open(claimant.clone(), DisputeReason::WinDenied, turn),
    };
    invalid.retain(|id| !revealed.contains_key(id));
    if !invalid.is_empty() {
        return deny(DenyReason::InvalidReveal(invalid));
    }
    let missing: Vec<_> = mine
        .iter()
        .filter(|id| !revealed.contains_key(*id))
        .copied()
        .collect();
    if !missing.is_empty() {
        return deny(DenyReason::Unrevealed(missing));
    }
    let ordered: Vec<RevealedData> = mine
        .iter()
        .filter_map(|id| revealed.get(id).cloned())
        .collect();
    match replay.replay(&ordered) {
        Ok(()) => Verdict::Granted,
        Err(e) => deny(DenyReason::Replay(e)),
    }
}
