use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::block::{Block, BlockKind};
use super::hash::Hash32;
use super::identity::NodeId;
use super::tx::{Transaction, TxError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("block {height}: prev_hash does not match the tip")]
    BadLink { height: u64 },
    #[error("block {height}: signature check failed ({reason})")]
    BadSignature { height: u64, reason: String },
    #[error("block {height}: malformed ({reason})")]
    MalformedBlock { height: u64, reason: String },
    #[error("transaction {0} is not on the chain")]
    UnknownTransaction(Hash32),
    #[error("fixed marker {marker} beyond tip {tip}")]
    MarkerBeyondTip { marker: u64, tip: u64 },
}

/// Violations reported by [`validate_chain`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    BadLink,
    /// A predecessor failed, so this block no longer chains to a trusted root.
    Unanchored,
    HeightGap {
        expected: u64,
    },
    SignatureCount {
        expected: usize,
        found: usize,
    },
    ForeignSigner {
        signer: NodeId,
    },
    BadSignature {
        signer: NodeId,
    },
    DuplicateSigner,
    EmptyDataBlock,
    MisplacedGenesis,
    GenesisMismatch {
        expected: Hash32,
        found: Hash32,
    },
    Transaction {
        tx: Hash32,
        error: TxError,
    },
    FixedMarkerBeyondTip {
        marker: u64,
    },
    InvalidatedUnknown {
        tx: Hash32,
    },
}

impl FindingKind {
    fn is_signature(&self) -> bool {
        matches!(
            self,
            FindingKind::SignatureCount { .. }
                | FindingKind::ForeignSigner { .. }
                | FindingKind::BadSignature { .. }
                | FindingKind::DuplicateSigner
        )
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FindingKind::BadLink => write!(f, "prev_hash does not match predecessor"),
            FindingKind::Unanchored => write!(f, "not anchored: an earlier block is invalid"),
            FindingKind::HeightGap { expected } => write!(f, "height gap, expected {expected}"),
            FindingKind::SignatureCount { expected, found } => {
                write!(f, "expected {expected} signature(s), found {found}")
            }
            FindingKind::ForeignSigner { signer } => {
                write!(f, "signed by {signer}, not the author")
            }
            FindingKind::BadSignature { signer } => {
                write!(f, "signature of {signer} does not verify")
            }
            FindingKind::DuplicateSigner => write!(f, "successor signature repeats the leader"),
            FindingKind::EmptyDataBlock => write!(f, "data block without transactions"),
            FindingKind::MisplacedGenesis => write!(f, "genesis kind away from the chain start"),
            FindingKind::GenesisMismatch { expected, found } => {
                write!(f, "genesis hash {found} differs from configured {expected}")
            }
            FindingKind::Transaction { tx, error } => {
                write!(f, "transaction {}: {error}", &tx.to_hex()[..16])
            }
            FindingKind::FixedMarkerBeyondTip { marker } => {
                write!(f, "fixed marker {marker} beyond tip")
            }
            FindingKind::InvalidatedUnknown { tx } => {
                write!(f, "invalidated id {} not on chain", &tx.to_hex()[..16])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub height: u64,
    pub kind: FindingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// Distinct heights carrying at least one finding, ascending.
    pub fn flagged_heights(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.findings.iter().map(|f| f.height).collect();
        set.into_iter().collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "height {}: {}", finding.height, finding.kind)?;
        }
        Ok(())
    }
}

/// Structural findings for a single block, independent of its neighbours.
pub(crate) fn block_findings(block: &Block) -> Vec<FindingKind> {
    let mut out = Vec::new();
    let expected = block.kind.required_signatures();
    if block.signatures.len() != expected {
        out.push(FindingKind::SignatureCount {
            expected,
            found: block.signatures.len(),
        });
    }
    if let Some(first) = block.signatures.first() {
        if first.signer != block.author {
            out.push(FindingKind::ForeignSigner {
                signer: first.signer.clone(),
            });
        }
    }
    if block.kind == BlockKind::Handover
        && block.signatures.len() == 2
        && block.signatures[1].signer == block.author
    {
        out.push(FindingKind::DuplicateSigner);
    }
    if !block.signatures.is_empty() {
        let digest = block.hash();
        for s in &block.signatures {
            if !super::identity::verify_signature(&s.signer.public_key, &digest.0, &s.signature) {
                out.push(FindingKind::BadSignature {
                    signer: s.signer.clone(),
                });
            }
        }
    }
    if block.kind == BlockKind::Data && block.transactions.is_empty() {
        out.push(FindingKind::EmptyDataBlock);
    }
    for tx in &block.transactions {
        if let Err(error) = tx.check() {
            out.push(FindingKind::Transaction { tx: tx.id, error });
        }
    }
    out
}

/// Hash that the block after `prev` must carry in `prev_hash`. A meta-state
/// genesis stands in for the summarized prefix, so its successor links to
/// the same anchor the meta-state block records.
pub fn link_target(prev: &Block) -> Hash32 {
    match prev.kind {
        BlockKind::MetaStateGenesis => prev.prev_hash,
        _ => prev.hash(),
    }
}

/// An append-only sequence of hash-linked blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
    fixed_upto: u64,
    invalidated: BTreeSet<Hash32>,
}

impl Chain {
    /// Start a chain from a genesis or meta-state genesis block.
    pub fn new(genesis: Block) -> Result<Chain, ChainError> {
        let height = genesis.height;
        if !genesis.kind.is_genesis() {
            return Err(ChainError::MalformedBlock {
                height,
                reason: "first block must be a genesis kind".into(),
            });
        }
        let findings = block_findings(&genesis);
        if let Some(f) = findings.first() {
            return Err(if f.is_signature() {
                ChainError::BadSignature {
                    height,
                    reason: f.to_string(),
                }
            } else {
                ChainError::MalformedBlock {
                    height,
                    reason: f.to_string(),
                }
            });
        }
        Ok(Chain {
            fixed_upto: height,
            blocks: vec![genesis],
            invalidated: BTreeSet::new(),
        })
    }

    /// Assemble without checks; pair with [`validate_chain`].
    pub fn from_parts(blocks: Vec<Block>, fixed_upto: u64, invalidated: BTreeSet<Hash32>) -> Chain {
        Chain {
            blocks,
            fixed_upto,
            invalidated,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks
            .last()
            .expect("chain holds at least a genesis block")
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.tip().hash()
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn base_height(&self) -> u64 {
        self.blocks.first().map_or(0, |b| b.height)
    }

    pub fn fixed_upto(&self) -> u64 {
        self.fixed_upto
    }

    pub fn set_fixed_upto(&mut self, marker: u64) -> Result<(), ChainError> {
        if marker > self.height() {
            return Err(ChainError::MarkerBeyondTip {
                marker,
                tip: self.height(),
            });
        }
        self.fixed_upto = marker;
        Ok(())
    }

    pub fn invalidated(&self) -> &BTreeSet<Hash32> {
        &self.invalidated
    }

    pub fn is_invalidated(&self, tx: &Hash32) -> bool {
        self.invalidated.contains(tx)
    }

    /// Flag a transaction as invalid. Blocks are never touched.
    pub fn invalidate(&mut self, tx: Hash32) -> Result<(), ChainError> {
        if self.find_transaction(&tx).is_none() {
            return Err(ChainError::UnknownTransaction(tx));
        }
        self.invalidated.insert(tx);
        Ok(())
    }

    pub fn block_at(&self, height: u64) -> Option<&Block> {
        let idx = height.checked_sub(self.base_height())?;
        self.blocks.get(usize::try_from(idx).ok()?)
    }

    pub fn transactions(&self) -> impl Iterator<Item = (&Block, &Transaction)> {
        self.blocks
            .iter()
            .flat_map(|b| b.transactions.iter().map(move |t| (b, t)))
    }

    pub fn find_transaction(&self, id: &Hash32) -> Option<(&Block, &Transaction)> {
        self.transactions().find(|(_, t)| t.id == *id)
    }

    /// Sum of declared transaction sizes, the unit used by storage accounting.
    pub fn total_size(&self) -> u64 {
        self.blocks.iter().map(Block::payload_size).sum()
    }

    /// Blocks after the fixed marker.
    pub fn untidy_blocks(&self) -> &[Block] {
        let split = self
            .blocks
            .iter()
            .position(|b| b.height > self.fixed_upto)
            .unwrap_or(self.blocks.len());
        &self.blocks[split..]
    }

    pub fn append_block(&mut self, block: Block) -> Result<(), ChainError> {
        let height = block.height;
        let tip = self.tip();
        if block.kind.is_genesis() {
            return Err(ChainError::MalformedBlock {
                height,
                reason: FindingKind::MisplacedGenesis.to_string(),
            });
        }
        if height != tip.height + 1 {
            return Err(ChainError::MalformedBlock {
                height,
                reason: FindingKind::HeightGap {
                    expected: tip.height + 1,
                }
                .to_string(),
            });
        }
        if block.prev_hash != link_target(tip) {
            return Err(ChainError::BadLink { height });
        }
        let findings = block_findings(&block);
        if let Some(f) = findings.iter().find(|f| f.is_signature()) {
            return Err(ChainError::BadSignature {
                height,
                reason: f.to_string(),
            });
        }
        if let Some(f) = findings.first() {
            return Err(ChainError::MalformedBlock {
                height,
                reason: f.to_string(),
            });
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Append a block whose signatures and transactions were already checked
    /// elsewhere; only height and link are verified.
    pub(crate) fn append_linked(&mut self, block: Block) -> Result<(), ChainError> {
        let tip = self.tip();
        if block.kind.is_genesis() || block.height != tip.height + 1 {
            return Err(ChainError::MalformedBlock {
                height: block.height,
                reason: FindingKind::HeightGap {
                    expected: tip.height + 1,
                }
                .to_string(),
            });
        }
        if block.prev_hash != link_target(tip) {
            return Err(ChainError::BadLink {
                height: block.height,
            });
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Consuming variant of [`Chain::append_block`].
    pub fn with_block(mut self, block: Block) -> Result<Chain, ChainError> {
        self.append_block(block)?;
        Ok(self)
    }

    /// Validate and additionally require the first block to hash to `genesis`.
    pub fn validate_against(&self, genesis: Hash32) -> ValidationReport {
        let mut report = validate_chain(self);
        if let Some(first) = self.blocks.first() {
            let found = first.hash();
            if first.kind == BlockKind::Genesis && found != genesis {
                report.findings.insert(
                    0,
                    Finding {
                        height: first.height,
                        kind: FindingKind::GenesisMismatch {
                            expected: genesis,
                            found,
                        },
                    },
                );
            }
        }
        report
    }
}

/// Check every chain invariant; an empty report means the chain is well formed.
pub fn validate_chain(chain: &Chain) -> ValidationReport {
    let mut findings = Vec::new();
    let mut anchored = true;
    for (i, block) in chain.blocks.iter().enumerate() {
        let mut own = block_findings(block);
        if i == 0 {
            if !block.kind.is_genesis() {
                own.push(FindingKind::MisplacedGenesis);
            }
        } else {
            let prev = &chain.blocks[i - 1];
            if block.kind.is_genesis() {
                own.push(FindingKind::MisplacedGenesis);
            }
            if block.height != prev.height + 1 {
                own.push(FindingKind::HeightGap {
                    expected: prev.height + 1,
                });
            }
            if block.prev_hash != link_target(prev) {
                own.push(FindingKind::BadLink);
            } else if !anchored {
                own.push(FindingKind::Unanchored);
            }
        }
        if !own.is_empty() {
            anchored = false;
        }
        findings.extend(own.into_iter().map(|kind| Finding {
            height: block.height,
            kind,
        }));
    }
    if let Some(tip) = chain.blocks.last() {
        if chain.fixed_upto > tip.height {
            findings.push(Finding {
                height: tip.height,
                kind: FindingKind::FixedMarkerBeyondTip {
                    marker: chain.fixed_upto,
                },
            });
        }
        let ids: BTreeSet<Hash32> = chain.transactions().map(|(_, t)| t.id).collect();
        for tx in chain.invalidated.difference(&ids) {
            findings.push(Finding {
                height: tip.height,
                kind: FindingKind::InvalidatedUnknown { tx: *tx },
            });
        }
    }
    ValidationReport { findings }
}
