//! Signed blocks and transactions, hash-linked into a [`Chain`].

mod block;
mod genesis;
mod hash;
mod identity;
mod ledger;
mod snapshot;
mod tx;

pub use block::{hash_block, Block, BlockKind, BlockSignature};
pub use genesis::{GenesisConfig, GenesisError};
pub use hash::{sha256, sha256_parts, Hash32};
pub use identity::{verify_signature, NodeId, NodeKey, Signature};
pub(crate) use ledger::block_findings;
pub use ledger::{
    link_target, validate_chain, Chain, ChainError, Finding, FindingKind, ValidationReport,
};
pub use snapshot::{
    read_snapshot, write_snapshot, SnapshotError, SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};
pub use tx::{make_transaction, reveal_target, Transaction, TransactionKind, TxError};
