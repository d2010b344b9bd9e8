use std::collections::BTreeMap;

use crate::chain::{reveal_target, Chain, Hash32, Transaction, TransactionKind};
use crate::contracts::{Commitment, RevealRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxClass {
    RelevantHidden,
    RelevantRevealed,
    /// Revealed relevant data already in the fixed chain.
    RelevantHistoric,
    BloatUnrevealed,
    BloatRevealed,
    Meta,
}

impl TxClass {
    pub fn is_revealed_bloat(self) -> bool {
        self == TxClass::BloatRevealed
    }

    pub fn is_unrevealed(self) -> bool {
        matches!(self, TxClass::RelevantHidden | TxClass::BloatUnrevealed)
    }
}

/// Reveal status of every commitment on a chain, each reveal checked
/// against its commitment.
#[derive(Debug, Clone)]
pub struct RevealView {
    fixed_upto: u64,
    heights: BTreeMap<Hash32, u64>,
    registry: RevealRegistry,
    /// Commitment id to the height of its valid reveal.
    reveal_height: BTreeMap<Hash32, u64>,
    /// Valid reveal tx id to commitment id.
    reveal_of: BTreeMap<Hash32, Hash32>,
}

impl RevealView {
    pub fn from_chain(chain: &Chain) -> Self {
        let mut view = RevealView {
            fixed_upto: chain.fixed_upto(),
            heights: BTreeMap::new(),
            registry: RevealRegistry::new(),
            reveal_height: BTreeMap::new(),
            reveal_of: BTreeMap::new(),
        };
        for (block, tx) in chain.transactions() {
            view.heights.insert(tx.id, block.height);
            if tx.kind.is_commitment() {
                if let Some(c) = Commitment::from_tx(tx, 0, u64::MAX / 2) {
                    view.registry.register(c);
                }
            } else if tx.kind.is_reveal() && view.registry.reveal_tx(tx, 0).is_ok() {
                let target = reveal_target(tx).expect("valid reveal has a target");
                view.reveal_height.insert(target, block.height);
                view.reveal_of.insert(tx.id, target);
            }
        }
        view
    }

    pub fn height_of(&self, tx: &Hash32) -> Option<u64> {
        self.heights.get(tx).copied()
    }

    pub fn is_revealed(&self, commitment: &Hash32) -> bool {
        self.registry.is_revealed(commitment)
    }

    /// Height of the valid reveal for `commitment`.
    pub fn revealed_at(&self, commitment: &Hash32) -> Option<u64> {
        self.reveal_height.get(commitment).copied()
    }

    /// The commitment a valid reveal transaction opens.
    pub fn opens(&self, reveal: &Hash32) -> Option<Hash32> {
        self.reveal_of.get(reveal).copied()
    }

    pub fn registry(&self) -> &RevealRegistry {
        &self.registry
    }

    fn is_bloat(&self, commitment: &Hash32) -> bool {
        self.registry.revealed(commitment).is_some_and(|r| r.bloat)
    }

    fn revealed_class(&self, tx: &Hash32) -> TxClass {
        match self.height_of(tx) {
            Some(h) if h <= self.fixed_upto => TxClass::RelevantHistoric,
            _ => TxClass::RelevantRevealed,
        }
    }
}

pub fn classify(tx: &Transaction, view: &RevealView) -> TxClass {
    use TransactionKind::*;
    match tx.kind {
        HiddenEncrypted | HiddenGameHash | Bloat => {
            if !view.is_revealed(&tx.id) {
                if tx.kind == Bloat {
                    TxClass::BloatUnrevealed
                } else {
                    TxClass::RelevantHidden
                }
            } else if view.is_bloat(&tx.id) {
                TxClass::BloatRevealed
            } else {
                view.revealed_class(&tx.id)
            }
        }
        RevealKey | RevealPreimage => match view.opens(&tx.id) {
            Some(target) if view.is_bloat(&target) => TxClass::BloatRevealed,
            Some(_) => view.revealed_class(&tx.id),
            None => TxClass::Meta,
        },
        Payload | DrawClaim | FogReport | RandomReveal => view.revealed_class(&tx.id),
        _ => TxClass::Meta,
    }
}

/// Class counts over a whole chain.
pub fn class_counts(chain: &Chain) -> BTreeMap<TxClass, usize> {
    let view = RevealView::from_chain(chain);
    let mut out = BTreeMap::new();
    for (_, tx) in chain.transactions() {
        *out.entry(classify(tx, &view)).or_insert(0) += 1;
    }
    out
}
