//! Prune: a garbage collecting node (GCN) rewrites the untidy chain.
//! Revealed relevant and meta transactions are transcribed into one
//! GCN-signed block of the fixed chain, still carrying their emitters'
//! signatures. Revealed bloat that is final is deleted. Everything still
//! hidden moves into a second GCN-signed block that starts the new untidy
//! chain.

use std::collections::BTreeSet;

use thiserror::Error;

use super::classify::{classify, RevealView, TxClass};
use crate::chain::{link_target, Block, BlockKind, Chain, Hash32, NodeId, NodeKey, Transaction};
use crate::consensus::Outcome;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PruneError {
    #[error("{got} is not the designated garbage collecting node ({expected})")]
    NotDesignated { expected: String, got: String },
    #[error("prune verification failed: {0}")]
    InvalidPrune(String),
}

/// What the GCN publishes next to the rewritten chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneProof {
    pub gcn: NodeId,
    pub input_tip: Hash32,
    pub transcribed: Vec<Hash32>,
    pub deleted: Vec<Hash32>,
    pub kept: Vec<Hash32>,
    pub fixed_upto: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneTrigger<'a> {
    /// Untidy chain larger than this many bytes.
    UntidyCap(u64),
    Vote(&'a Outcome),
}

pub fn untidy_size(chain: &Chain) -> u64 {
    chain.untidy_blocks().iter().map(Block::payload_size).sum()
}

pub fn should_prune(chain: &Chain, trigger: PruneTrigger<'_>) -> bool {
    match trigger {
        PruneTrigger::UntidyCap(cap) => untidy_size(chain) > cap,
        PruneTrigger::Vote(o) => o.passed,
    }
}

/// The author of the untidy block whose append pushed the untidy chain
/// over `cap` bytes.
pub fn designated_gcn(chain: &Chain, cap: u64) -> Option<NodeId> {
    let mut total = 0u64;
    for b in chain.untidy_blocks() {
        total += b.payload_size();
        if total > cap {
            return Some(b.author.clone());
        }
    }
    None
}

struct Layout<'a> {
    prefix: &'a [Block],
    transcribe: Vec<Transaction>,
    keep: Vec<Transaction>,
    deleted: Vec<Hash32>,
}

/// Deterministic split of the untidy chain; every verifier recomputes it.
fn layout(chain: &Chain, final_height: u64) -> Layout<'_> {
    let view = RevealView::from_chain(chain);
    let untidy = chain.untidy_blocks();
    let prefix = &chain.blocks()[..chain.blocks().len() - untidy.len()];
    let mut out = Layout {
        prefix,
        transcribe: Vec::new(),
        keep: Vec::new(),
        deleted: Vec::new(),
    };
    for tx in untidy.iter().flat_map(|b| &b.transactions) {
        match classify(tx, &view) {
            TxClass::BloatRevealed => {
                let commitment = view.opens(&tx.id).unwrap_or(tx.id);
                let settled = view
                    .revealed_at(&commitment)
                    .is_some_and(|h| h <= final_height);
                if settled {
                    out.deleted.push(tx.id);
                } else {
                    out.keep.push(tx.clone());
                }
            }
            TxClass::RelevantHidden | TxClass::BloatUnrevealed => out.keep.push(tx.clone()),
            TxClass::RelevantRevealed | TxClass::RelevantHistoric | TxClass::Meta => {
                out.transcribe.push(tx.clone())
            }
        }
    }
    out
}

fn assemble(chain: &Chain, layout: &Layout<'_>, gcn: &NodeKey) -> (Chain, u64) {
    let mut blocks = layout.prefix.to_vec();
    let last_untidy = chain.tip();
    let mut fixed = chain.fixed_upto();
    for (txs, fixes) in [(&layout.transcribe, true), (&layout.keep, false)] {
        if txs.is_empty() {
            continue;
        }
        let prev = blocks.last().expect("prefix holds the genesis");
        let block = Block::new(
            prev.height + 1,
            link_target(prev),
            gcn.id().clone(),
            last_untidy.turn_index,
            last_untidy.logical_time,
            BlockKind::Data,
            txs.clone(),
        )
        .signed(gcn);
        if fixes {
            fixed = block.height;
        }
        blocks.push(block);
    }
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
    (Chain::from_parts(blocks, fixed, invalidated), fixed)
}

/// Rewrite the untidy chain. Only revealed bloat whose reveal sits at or
/// below `final_height` is deleted.
pub fn prune(
    chain: &Chain,
    gcn: &NodeKey,
    designated: &NodeId,
    final_height: u64,
) -> Result<(Chain, PruneProof), PruneError> {
    if gcn.id() != designated {
        return Err(PruneError::NotDesignated {
            expected: designated.label.clone(),
            got: gcn.id().label.clone(),
        });
    }
    let l = layout(chain, final_height);
    let (out, fixed_upto) = assemble(chain, &l, gcn);
    let proof = PruneProof {
        gcn: gcn.id().clone(),
        input_tip: chain.tip_hash(),
        transcribed: l.transcribe.iter().map(|t| t.id).collect(),
        deleted: l.deleted.clone(),
        kept: l.keep.iter().map(|t| t.id).collect(),
        fixed_upto,
    };
    Ok((out, proof))
}

/// Independent re-verification by a receiving node.
pub fn verify_prune(
    input: &Chain,
    output: &Chain,
    proof: &PruneProof,
    final_height: u64,
) -> Result<(), PruneError> {
    let bad = |m: &str| Err(PruneError::InvalidPrune(m.to_string()));
    if proof.input_tip != input.tip_hash() {
        return bad("proof refers to another chain");
    }
    let l = layout(input, final_height);
    let blocks = output.blocks();
    if blocks.len() < l.prefix.len() || blocks[..l.prefix.len()] != *l.prefix {
        return bad("fixed prefix altered");
    }
    let rest = &blocks[l.prefix.len()..];
    let expected: Vec<&Vec<Transaction>> = [&l.transcribe, &l.keep]
        .into_iter()
        .filter(|t| !t.is_empty())
        .collect();
    if rest.len() != expected.len() {
        return bad("unexpected number of rewritten blocks");
    }
    let mut prev = l.prefix.last().expect("prefix holds the genesis");
    let tip = input.tip();
    for (block, txs) in rest.iter().zip(expected) {
        if block.author != proof.gcn
            || block.kind != BlockKind::Data
            || block.height != prev.height + 1
            || block.prev_hash != link_target(prev)
            || block.turn_index != tip.turn_index
            || block.logical_time != tip.logical_time
        {
            return bad("rewritten block header");
        }
        if block.signatures.len() != 1
            || block.signatures[0].signer != proof.gcn
            || !block.signature_valid(&block.signatures[0])
        {
            return bad("rewritten block signature");
        }
        if block.transactions != *txs {
            return bad("transaction set differs from recomputation");
        }
        if block.transactions.iter().any(|t| t.check().is_err()) {
            return bad("transaction no longer verifies under its emitter");
        }
        prev = block;
    }
    let fixed = if l.transcribe.is_empty() {
        input.fixed_upto()
    } else {
        l.prefix.last().expect("prefix").height + 1
    };
    if output.fixed_upto() != fixed || proof.fixed_upto != fixed {
        return bad("fixed marker");
    }
    let deleted: Vec<Hash32> = l.deleted;
    if proof.deleted != deleted {
        return bad("deletion list");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneResolution {
    FirstAccepted,
    SecondAccepted,
}

/// A failed proposal is recomputed by a second GCN, and the first GCN must
/// accept that recomputation too.
pub fn resolve_prune(
    input: &Chain,
    first: (&Chain, &PruneProof),
    second_gcn: &NodeKey,
    final_height: u64,
) -> Result<(Chain, PruneProof, PruneResolution), PruneError> {
    if verify_prune(input, first.0, first.1, final_height).is_ok() {
        return Ok((
            first.0.clone(),
            first.1.clone(),
            PruneResolution::FirstAccepted,
        ));
    }
    let (chain, proof) = prune(input, second_gcn, second_gcn.id(), final_height)?;
    verify_prune(input, &chain, &proof, final_height)?;
    Ok((chain, proof, PruneResolution::SecondAccepted))
}
