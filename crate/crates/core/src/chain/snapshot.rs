use std::collections::BTreeSet;

use thiserror::Error;

use super::block::Block;
use super::hash::Hash32;
use super::ledger::Chain;
use crate::codec::{DecodeError, Decoder, Encoder};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"POTC";
pub const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a chain snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("snapshot holds no blocks")]
    Empty,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `POTC` ‖ version u16 ‖ fixed_upto ‖ invalidated ids ‖ blocks.
pub fn write_snapshot(chain: &Chain) -> Vec<u8> {
    let mut e = Encoder::new();
    e.raw(SNAPSHOT_MAGIC)
        .u16(SNAPSHOT_VERSION)
        .u64(chain.fixed_upto());
    e.u64(chain.invalidated().len() as u64);
    for id in chain.invalidated() {
        e.raw(&id.0);
    }
    e.u64(chain.len() as u64);
    for b in chain.blocks() {
        b.encode(&mut e);
    }
    e.finish()
}

/// Decode a snapshot. The result is not validated; run
/// [`validate_chain`](super::validate_chain) on it.
pub fn read_snapshot(bytes: &[u8]) -> Result<Chain, SnapshotError> {
    let mut d = Decoder::new(bytes);
    if bytes.len() < 4 || &d.array::<4>()? != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = d.u16()?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version(version));
    }
    let fixed_upto = d.u64()?;
    let mut invalidated = BTreeSet::new();
    for _ in 0..d.u64()? {
        invalidated.insert(Hash32(d.array()?));
    }
    let count = d.u64()?;
    if count == 0 {
        return Err(SnapshotError::Empty);
    }
    let mut blocks = Vec::new();
    for _ in 0..count {
        blocks.push(Block::decode(&mut d)?);
    }
    d.finish()?;
    Ok(Chain::from_parts(blocks, fixed_upto, invalidated))
}
