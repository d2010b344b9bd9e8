//! Proof-of-Turn: a round-robin consensus mechanism for turn-based
//! distributed applications.
//!
//! The crate is organised bottom-up:
//!
//! * [`chain`]: signed, content-addressed blocks and transactions.
//! * [`consensus`]: the turn state machine, finality, votes, forks and membership.
//! * [`peering`]: pull intervals and the decimal push tree.
//! * [`contracts`]: commit/reveal primitives, randomization, card piles, fog of war.
//! * [`storage`]: bloat accounting, pruning, child chains and meta-state cuts.
//! * [`sim`]: a deterministic discrete-event simulator and a turn-based space conquest game.

pub mod chain;
pub mod codec;
pub mod config;
pub mod consensus;
pub mod contracts;
pub mod peering;
pub mod sim;
pub mod storage;

/// Logical simulator time.
pub type Tick = u64;

pub use chain::{Block, BlockKind, Chain, Hash32, NodeId, NodeKey, Transaction, TransactionKind};
