//! Meta-state cuts replace a fully revealed prefix with one block holding
//! the game state at the cut. That block becomes the new genesis.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::classify::RevealView;
use crate::chain::{
    make_transaction, Block, BlockKind, Chain, Hash32, NodeKey, Transaction, TransactionKind,
    TxError,
};
use crate::consensus::Outcome;

/// Body prefix of the snapshot transaction, followed by the cut height
/// (u64 little endian) and the application snapshot.
pub const META_PREFIX: &[u8] = b"POT-META\0";

/// Application state that can be replayed from transactions.
pub trait GameState: Default {
    fn apply(&mut self, tx: &Transaction);
    fn snapshot(&self) -> Vec<u8>;
    fn restore(bytes: &[u8]) -> Option<Self>;
}

/// Key/value state fed by `key=value` payload transactions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValueState(pub BTreeMap<String, String>);

impl GameState for KeyValueState {
    fn apply(&mut self, tx: &Transaction) {
        if tx.kind != TransactionKind::Payload || tx.body.starts_with(META_PREFIX) {
            return;
        }
        let Ok(text) = std::str::from_utf8(&tx.body) else {
            return;
        };
        if let Some((k, v)) = text.split_once('=') {
            self.0.insert(k.to_string(), v.to_string());
        }
    }

    fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&self.0).expect("string map serializes")
    }

    fn restore(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok().map(KeyValueState)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetaError {
    #[error("commitment {commitment} at height {height} is not revealed by the cut")]
    UnrevealedBeforeCut { commitment: Hash32, height: u64 },
    #[error("the network did not approve the cut")]
    VoteFailed,
    #[error("cut height {cut} outside {base}..={tip}")]
    CutOutOfRange { cut: u64, base: u64, tip: u64 },
    #[error("retained tail of {tail} blocks reaches below the chain base")]
    TailTooLong { tail: u64 },
    #[error("malformed meta-state block")]
    BadSnapshot,
    #[error(transparent)]
    Tx(#[from] TxError),
}

/// Split a meta-state genesis into cut height and snapshot bytes.
pub fn read_meta_block(block: &Block) -> Option<(u64, &[u8])> {
    if block.kind != BlockKind::MetaStateGenesis {
        return None;
    }
    let body = &block.transactions.first()?.body;
    let rest = body.strip_prefix(META_PREFIX)?;
    if rest.len() < 8 {
        return None;
    }
    let cut = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes"));
    Some((cut, &rest[8..]))
}

/// Replay every valid transaction at or below `upto`. A meta-state genesis
/// restores its snapshot and the blocks it already covers are skipped.
pub fn replay_to<S: GameState>(chain: &Chain, upto: u64) -> Result<S, MetaError> {
    let mut state = S::default();
    let mut covered = 0;
    let mut start = 0;
    if let Some(first) = chain.blocks().first() {
        if first.kind == BlockKind::MetaStateGenesis {
            let (cut, snap) = read_meta_block(first).ok_or(MetaError::BadSnapshot)?;
            state = S::restore(snap).ok_or(MetaError::BadSnapshot)?;
            covered = cut;
            start = 1;
        }
    }
    for block in &chain.blocks()[start..] {
        if block.height > upto {
            break;
        }
        if start == 1 && block.height <= covered {
            continue;
        }
        for tx in &block.transactions {
            if !chain.is_invalidated(&tx.id) {
                state.apply(tx);
            }
        }
    }
    Ok(state)
}

pub fn replay_chain<S: GameState>(chain: &Chain) -> Result<S, MetaError> {
    replay_to(chain, u64::MAX)
}

/// Cut at `cut_height`, keeping `retained_tail` blocks before the cut as
/// history. The meta-state block takes the place of block
/// `cut_height - retained_tail` and anchors to its hash, so the block
/// after it still links.
pub fn meta_state_cut<S: GameState>(
    chain: &Chain,
    cut_height: u64,
    retained_tail: u64,
    author: &NodeKey,
    vote: &Outcome,
) -> Result<Chain, MetaError> {
    if cut_height == 0 {
        return Ok(chain.clone());
    }
    if !vote.passed {
        return Err(MetaError::VoteFailed);
    }
    let (base, tip) = (chain.base_height(), chain.height());
    if cut_height <= base || cut_height > tip {
        return Err(MetaError::CutOutOfRange {
            cut: cut_height,
            base,
            tip,
        });
    }
    let anchor = cut_height
        .checked_sub(retained_tail)
        .filter(|a| *a > base)
        .ok_or(MetaError::TailTooLong {
            tail: retained_tail,
        })?;
    let view = RevealView::from_chain(chain);
    for (block, tx) in chain.transactions() {
        if block.height > cut_height {
            break;
        }
        if tx.kind.is_commitment() && view.revealed_at(&tx.id).is_none_or(|h| h > cut_height) {
            return Err(MetaError::UnrevealedBeforeCut {
                commitment: tx.id,
                height: block.height,
            });
        }
    }
    let state: S = replay_to(chain, cut_height)?;
    let mut body = META_PREFIX.to_vec();
    body.extend_from_slice(&cut_height.to_le_bytes());
    body.extend_from_slice(&state.snapshot());
    // no padding requested, so the generator is never drawn from
    let snapshot_tx = make_transaction(
        author,
        TransactionKind::Payload,
        body,
        None,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let anchor_block = chain.block_at(anchor).expect("anchor in range");
    let cut_block = chain.block_at(cut_height).expect("cut in range");
    let meta = Block::new(
        anchor,
        anchor_block.hash(),
        author.id().clone(),
        cut_block.turn_index,
        cut_block.logical_time,
        BlockKind::MetaStateGenesis,
        vec![snapshot_tx],
    )
    .signed(author);
    let mut blocks = vec![meta];
    blocks.extend(chain.blocks().iter().filter(|b| b.height > anchor).cloned());
    let present: BTreeSet<Hash32> = blocks
        .iter()
        .flat_map(|b| b.transactions.iter().map(|t| t.id))
        .collect();
    let invalidated = chain
        .invalidated()
        .iter()
        .filter(|id| present.contains(id))
        .copied()
        .collect();
    Ok(Chain::from_parts(
        blocks,
        chain.fixed_upto().max(anchor),
        invalidated,
    ))
}
