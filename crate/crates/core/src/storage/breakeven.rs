//! Encrypted hidden transactions against game hashes. Dropping the shared
//! terms, encryption costs `f·BT(l)` and game hashes `H + f·BT(s)`.

use thiserror::Error;

use super::params::{bytes_to_mb, StorageParams};
use crate::consensus::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advice {
    GameHash,
    Encrypted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeAdvice {
    pub advice: Advice,
    /// Bloat factor at which both modes cost the same.
    pub threshold: Fraction,
    pub encrypted_cost: Fraction,
    pub game_hash_cost: Fraction,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BreakevenError {
    #[error("large bloat is not larger than small bloat; no finite threshold")]
    Degenerate,
}

/// Compare both modes at bloat factor `f`.
pub fn breakeven(f: Fraction, params: &StorageParams) -> Result<ModeAdvice, BreakevenError> {
    compare(
        f,
        params.size_bloat_large,
        bytes_to_mb(params.size_bloat_small),
        bytes_to_mb(params.game_hash_size),
    )
}

/// Same comparison when bloat is padded to the average transaction size.
pub fn breakeven_for_tx_size(
    f: Fraction,
    avg_tx_bytes: u64,
    params: &StorageParams,
) -> Result<ModeAdvice, BreakevenError> {
    let small = bytes_to_mb(params.size_bloat_small);
    let hash = bytes_to_mb(params.game_hash_size);
    let large = bytes_to_mb(avg_tx_bytes);
    if large <= small {
        // no threshold, but the game hash can never pay off
        return Ok(ModeAdvice {
            advice: Advice::Encrypted,
            threshold: Fraction::from_integer(0),
            encrypted_cost: f * large,
            game_hash_cost: hash + f * small,
        });
    }
    compare(f, large, small, hash)
}

fn compare(
    f: Fraction,
    large: Fraction,
    small: Fraction,
    hash: Fraction,
) -> Result<ModeAdvice, BreakevenError> {
    if large <= small {
        return Err(BreakevenError::Degenerate);
    }
    let encrypted_cost = f * large;
    let game_hash_cost = hash + f * small;
    Ok(ModeAdvice {
        advice: if game_hash_cost < encrypted_cost {
            Advice::GameHash
        } else {
            Advice::Encrypted
        },
        threshold: hash / (large - small),
        encrypted_cost,
        game_hash_cost,
    })
}
