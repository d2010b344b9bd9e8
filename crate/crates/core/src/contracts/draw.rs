//! Card draws by pile access (private or public) and visibility (open,
//! private, hidden). Cases are numbered row by row:
//!
//! | pile \ draw | open | private | hidden |
//! |-------------|------|---------|--------|
//! | private     | 1    | 2       | 3      |
//! | public      | 4    | 5       | 6      |

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::commit::{bloat, commit, CommitMode, CommitOptions, Committed};
use super::deck::{Card, ClaimChain, DeckCommitment, DeckError, DeckSecrets};
use super::random::SplitMix64;
use crate::chain::{Hash32, NodeKey, Transaction, TxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DrawCase {
    PrivateOpen = 1,
    PrivatePrivate = 2,
    PrivateHidden = 3,
    PublicOpen = 4,
    PublicPrivate = 5,
    PublicHidden = 6,
}

impl DrawCase {
    pub fn from_number(n: u8) -> Option<Self> {
        Some(match n {
            1 => Self::PrivateOpen,
            2 => Self::PrivatePrivate,
            3 => Self::PrivateHidden,
            4 => Self::PublicOpen,
            5 => Self::PublicPrivate,
            6 => Self::PublicHidden,
            _ => return None,
        })
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DrawError {
    #[error("a hidden draw from a public pile needs a helper node")]
    HelperRequired,
    #[error("index {0} already drawn")]
    AlreadyDrawn(usize),
    #[error("invalid claim: {0}")]
    InvalidClaim(String),
    #[error("pile is empty")]
    EmptyPile,
    #[error("case {0} cannot draw from this pile")]
    WrongPile(u8),
    #[error(transparent)]
    Tx(#[from] TxError),
}

impl From<DeckError> for DrawError {
    fn from(e: DeckError) -> Self {
        match e {
            DeckError::AlreadyDrawn(i) => DrawError::AlreadyDrawn(i),
            other => DrawError::InvalidClaim(other.to_string()),
        }
    }
}

/// A pile whose cards are listed in the clear (to everyone, or only to
/// its owner for private piles).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownPile {
    pub cards: Vec<Card>,
}

impl KnownPile {
    pub fn new(cards: Vec<Card>) -> Self {
        KnownPile { cards }
    }

    fn take(&mut self, seed: u64) -> Result<(usize, Card), DrawError> {
        if self.cards.is_empty() {
            return Err(DrawError::EmptyPile);
        }
        let index = pick_index(seed, self.cards.len());
        Ok((index, self.cards.remove(index)))
    }
}

/// Index chosen from a randomization seed: generator output mod length.
pub fn pick_index(seed: u64, len: usize) -> usize {
    (SplitMix64::new(seed).next_u64() % len as u64) as usize
}

pub enum Pile<'a> {
    Known(&'a mut KnownPile),
    Deck {
        deck: &'a mut DeckCommitment,
        secrets: &'a DeckSecrets,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawPolicy {
    /// Fake bloat sessions that accompany every hidden draw.
    pub fake_sessions: usize,
    pub commit: CommitOptions,
}

impl Default for DrawPolicy {
    fn default() -> Self {
        DrawPolicy {
            fake_sessions: 2,
            commit: CommitOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DrawResult {
    /// Cases 1 and 4: index and card broadcast.
    Open { index: usize, card: Card },
    /// Case 2: the drawer commits to card and index; checked on reveal.
    Private {
        index: usize,
        card: Card,
        committed: Committed,
    },
    /// Case 3: the real commitment hides among fake sessions.
    Hidden {
        index: usize,
        card: Card,
        real: Hash32,
        txs: Vec<Transaction>,
        committed: Committed,
    },
    /// Case 5: index public, card seen only by the claimant.
    Claimed { index: usize, chain: ClaimChain },
}

impl DrawResult {
    pub fn card(&self) -> Card {
        match self {
            DrawResult::Open { card, .. }
            | DrawResult::Private { card, .. }
            | DrawResult::Hidden { card, .. } => *card,
            DrawResult::Claimed { chain, .. } => chain.card,
        }
    }
}

/// Payload committed for private and hidden draws.
pub fn draw_record(index: usize, card: Card) -> Vec<u8> {
    let mut out = b"DRAW".to_vec();
    out.extend_from_slice(&(index as u64).to_le_bytes());
    out.extend_from_slice(&card.to_le_bytes());
    out
}

/// `seed` comes from a finished randomization session; for case 5 it
/// selects among the undrawn deck positions.
pub fn draw<R: RngCore + CryptoRng>(
    case: DrawCase,
    pile: Pile<'_>,
    actor: &NodeKey,
    seed: u64,
    policy: &DrawPolicy,
    rng: &mut R,
) -> Result<DrawResult, DrawError> {
    match (case, pile) {
        (DrawCase::PublicHidden, _) => Err(DrawError::HelperRequired),
        (DrawCase::PrivateOpen | DrawCase::PublicOpen, Pile::Known(p)) => {
            let (index, card) = p.take(seed)?;
            Ok(DrawResult::Open { index, card })
        }
        (DrawCase::PrivatePrivate, Pile::Known(p)) => {
            let (index, card) = p.take(seed)?;
            let committed = commit(
                actor,
                &draw_record(index, card),
                CommitMode::GameHash,
                policy.commit,
                rng,
            )?;
            Ok(DrawResult::Private {
                index,
                card,
                committed,
            })
        }
        (DrawCase::PrivateHidden, Pile::Known(p)) => {
            let (index, card) = p.take(seed)?;
            let record = draw_record(index, card);
            let opts = CommitOptions {
                pad_to: Some(padded_size(record.len())),
                ..policy.commit
            };
            let committed = commit(actor, &record, CommitMode::Encrypted, opts, rng)?;
            let mut txs = vec![committed.tx.clone()];
            for _ in 0..policy.fake_sessions {
                txs.push(bloat(actor, record.len(), opts, rng)?.tx);
            }
            txs.shuffle(rng);
            Ok(DrawResult::Hidden {
                index,
                card,
                real: committed.tx.id,
                txs,
                committed,
            })
        }
        (DrawCase::PublicPrivate, Pile::Deck { deck, secrets }) => {
            let open: Vec<usize> = (0..deck.card_count)
                .filter(|i| !deck.drawn().contains(i))
                .collect();
            if open.is_empty() {
                return Err(DrawError::EmptyPile);
            }
            let index = open[pick_index(seed, open.len())];
            let chain = deck.draw(index, secrets)?;
            Ok(DrawResult::Claimed { index, chain })
        }
        (case, _) => Err(DrawError::WrongPile(case.number())),
    }
}

/// Explicit case 5 draw at a chosen index.
pub fn draw_index(
    deck: &mut DeckCommitment,
    secrets: &DeckSecrets,
    index: usize,
) -> Result<DrawResult, DrawError> {
    let chain = deck.draw(index, secrets)?;
    Ok(DrawResult::Claimed { index, chain })
}

/// Real and fake hidden draws share one declared size: encrypted record
/// plus flag, salt and tag, with room for the bloat marker.
fn padded_size(record_len: usize) -> u64 {
    (record_len + super::commit::BLOAT_MARKER.len() + 1 + super::commit::SALT_LEN + 16) as u64
}
