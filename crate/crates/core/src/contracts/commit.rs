use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::dispute::{Dispute, DisputeReason};
use super::{open_sealed, seal};
use crate::chain::{
    make_transaction, reveal_target, sha256_parts, Hash32, NodeId, NodeKey, Transaction,
    TransactionKind, TxError,
};

pub const SALT_LEN: usize = 16;
/// Plaintext prefix that marks dummy data once a bloat commitment is opened.
pub const BLOAT_MARKER: &[u8] = b"\0BLOAT\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitMode {
    Encrypted,
    GameHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommitPayload {
    Encrypted {
        ciphertext: Vec<u8>,
        salt_present: bool,
    },
    GameHash {
        digest: Hash32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    /// Id of the transaction carrying the commitment.
    pub id: Hash32,
    pub payload: CommitPayload,
    pub owner: NodeId,
    pub created_turn: u64,
    /// Turns after `created_turn` by which the reveal is due.
    pub reveal_deadline: u64,
    pub bloat: bool,
}

impl Commitment {
    /// Rebuild the commitment record from its on-chain transaction.
    pub fn from_tx(tx: &Transaction, created_turn: u64, reveal_deadline: u64) -> Option<Self> {
        let payload = match tx.kind {
            TransactionKind::HiddenGameHash => {
                let digest = Hash32(tx.body.as_slice().try_into().ok()?);
                CommitPayload::GameHash { digest }
            }
            // The salt flag travels inside the ciphertext; it is learned on reveal.
            TransactionKind::HiddenEncrypted | TransactionKind::Bloat => CommitPayload::Encrypted {
                ciphertext: tx.body.clone(),
                salt_present: false,
            },
            _ => return None,
        };
        Some(Commitment {
            id: tx.id,
            payload,
            owner: tx.author.clone(),
            created_turn,
            reveal_deadline,
            bloat: tx.kind == TransactionKind::Bloat,
        })
    }

    pub fn payload_size(&self) -> usize {
        match &self.payload {
            CommitPayload::Encrypted { ciphertext, .. } => ciphertext.len(),
            CommitPayload::GameHash { .. } => 32,
        }
    }

    pub fn due_turn(&self) -> u64 {
        self.created_turn + self.reveal_deadline
    }

    pub fn kind(&self) -> TransactionKind {
        match (&self.payload, self.bloat) {
            (_, true) => TransactionKind::Bloat,
            (CommitPayload::GameHash { .. }, _) => TransactionKind::HiddenGameHash,
            (CommitPayload::Encrypted { .. }, _) => TransactionKind::HiddenEncrypted,
        }
    }

    /// Check a secret against the commitment and return the hidden data.
    pub fn open(&self, secret: &RevealSecret) -> Option<Vec<u8>> {
        match (&self.payload, secret) {
            (CommitPayload::GameHash { digest }, RevealSecret::Preimage { salt, data }) => {
                (game_hash(data, salt.as_ref()) == *digest).then(|| data.clone())
            }
            (CommitPayload::Encrypted { ciphertext, .. }, RevealSecret::Key(key)) => {
                let plain = open_sealed(key, ciphertext)?;
                let (&flag, rest) = plain.split_first()?;
                match flag {
                    0 => Some(rest.to_vec()),
                    1 if rest.len() >= SALT_LEN => Some(rest[SALT_LEN..].to_vec()),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// What the owner keeps back until the reveal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RevealSecret {
    Key([u8; 32]),
    Preimage {
        salt: Option<[u8; SALT_LEN]>,
        data: Vec<u8>,
    },
}

impl RevealSecret {
    pub fn kind(&self) -> TransactionKind {
        match self {
            RevealSecret::Key(_) => TransactionKind::RevealKey,
            RevealSecret::Preimage { .. } => TransactionKind::RevealPreimage,
        }
    }

    /// Reveal body: commitment id followed by the secret.
    pub fn to_body(&self, commitment: &Hash32) -> Vec<u8> {
        let mut out = commitment.0.to_vec();
        match self {
            RevealSecret::Key(k) => out.extend_from_slice(k),
            RevealSecret::Preimage { salt, data } => {
                match salt {
                    Some(s) => {
                        out.push(1);
                        out.extend_from_slice(s);
                    }
                    None => out.push(0),
                }
                out.extend_from_slice(data);
            }
        }
        out
    }

    pub fn from_tx(tx: &Transaction) -> Option<(Hash32, RevealSecret)> {
        let target = reveal_target(tx)?;
        let rest = &tx.body[32..];
        let secret = match tx.kind {
            TransactionKind::RevealKey => RevealSecret::Key(rest.try_into().ok()?),
            TransactionKind::RevealPreimage => {
                let (&flag, rest) = rest.split_first()?;
                match flag {
                    0 => RevealSecret::Preimage {
                        salt: None,
                        data: rest.to_vec(),
                    },
                    1 if rest.len() >= SALT_LEN => RevealSecret::Preimage {
                        salt: Some(rest[..SALT_LEN].try_into().expect("salt length")),
                        data: rest[SALT_LEN..].to_vec(),
                    },
                    _ => return None,
                }
            }
            _ => return None,
        };
        Some((target, secret))
    }
}

pub fn game_hash(data: &[u8], salt: Option<&[u8; SALT_LEN]>) -> Hash32 {
    match salt {
        Some(s) => sha256_parts(&[data, s]),
        None => sha256_parts(&[data]),
    }
}

#[derive(Debug, Clone)]
pub struct Committed {
    pub commitment: Commitment,
    pub tx: Transaction,
    pub secret: RevealSecret,
}

impl Committed {
    pub fn reveal_tx<R: RngCore>(
        &self,
        owner: &NodeKey,
        rng: &mut R,
    ) -> Result<Transaction, TxError> {
        make_transaction(
            owner,
            self.secret.kind(),
            self.secret.to_body(&self.commitment.id),
            None,
            rng,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitOptions {
    pub salted: bool,
    pub created_turn: u64,
    pub reveal_deadline: u64,
    pub pad_to: Option<u64>,
}

impl Default for CommitOptions {
    fn default() -> Self {
        CommitOptions {
            salted: true,
            created_turn: 0,
            reveal_deadline: 10,
            pad_to: None,
        }
    }
}

pub fn commit<R: RngCore + CryptoRng>(
    owner: &NodeKey,
    data: &[u8],
    mode: CommitMode,
    opts: CommitOptions,
    rng: &mut R,
) -> Result<Committed, TxError> {
    commit_kind(owner, data, mode, false, opts, rng)
}

/// Dummy encrypted commitment padded like a relevant one.
pub fn bloat<R: RngCore + CryptoRng>(
    owner: &NodeKey,
    filler: usize,
    opts: CommitOptions,
    rng: &mut R,
) -> Result<Committed, TxError> {
    let mut data = BLOAT_MARKER.to_vec();
    let start = data.len();
    data.resize(start + filler, 0);
    rng.fill_bytes(&mut data[start..]);
    commit_kind(owner, &data, CommitMode::Encrypted, true, opts, rng)
}

fn commit_kind<R: RngCore + CryptoRng>(
    owner: &NodeKey,
    data: &[u8],
    mode: CommitMode,
    bloat: bool,
    opts: CommitOptions,
    rng: &mut R,
) -> Result<Committed, TxError> {
    let salt = opts.salted.then(|| {
        let mut s = [0u8; SALT_LEN];
        rng.fill_bytes(&mut s);
        s
    });
    let (payload, secret, body) = match mode {
        CommitMode::GameHash => {
            let digest = game_hash(data, salt.as_ref());
            let secret = RevealSecret::Preimage {
                salt,
                data: data.to_vec(),
            };
            (
                CommitPayload::GameHash { digest },
                secret,
                digest.0.to_vec(),
            )
        }
        CommitMode::Encrypted => {
            let mut key = [0u8; 32];
            rng.fill_bytes(&mut key);
            let mut plain = Vec::with_capacity(1 + SALT_LEN + data.len());
            match &salt {
                Some(s) => {
                    plain.push(1);
                    plain.extend_from_slice(s);
                }
                None => plain.push(0),
            }
            plain.extend_from_slice(data);
            let ciphertext = seal(&key, &plain);
            let body = ciphertext.clone();
            (
                CommitPayload::Encrypted {
                    ciphertext,
                    salt_present: salt.is_some(),
                },
                RevealSecret::Key(key),
                body,
            )
        }
    };
    let kind = if bloat {
        TransactionKind::Bloat
    } else if mode == CommitMode::GameHash {
        TransactionKind::HiddenGameHash
    } else {
        TransactionKind::HiddenEncrypted
    };
    let tx = make_transaction(owner, kind, body, opts.pad_to, rng)?;
    let commitment = Commitment {
        id: tx.id,
        payload,
        owner: owner.id().clone(),
        created_turn: opts.created_turn,
        reveal_deadline: opts.reveal_deadline,
        bloat,
    };
    Ok(Committed {
        commitment,
        tx,
        secret,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealedData {
    pub commitment: Hash32,
    pub owner: NodeId,
    pub data: Vec<u8>,
    pub bloat: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RevealError {
    #[error("unknown commitment {0}")]
    Unknown(Hash32),
    #[error("commitment {0} already revealed")]
    AlreadyRevealed(Hash32),
    #[error("reveal does not match commitment; {} blamed", blamed.label)]
    Mismatch { blamed: NodeId },
    #[error("reveal due at turn {due}, now {now}")]
    DeadlineExceeded { due: u64, now: u64 },
    #[error("malformed reveal transaction")]
    Malformed,
}

/// Commitments seen on chain and their reveal state. Every node keeps one
/// and checks reveals on its own.
#[derive(Debug, Clone, Default)]
pub struct RevealRegistry {
    commitments: BTreeMap<Hash32, Commitment>,
    revealed: BTreeMap<Hash32, RevealedData>,
    overdue: BTreeSet<Hash32>,
    disputes: Vec<Dispute>,
}

impl RevealRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, c: Commitment) {
        self.commitments.insert(c.id, c);
    }

    pub fn commitment(&self, id: &Hash32) -> Option<&Commitment> {
        self.commitments.get(id)
    }

    pub fn commitments(&self) -> impl Iterator<Item = &Commitment> {
        self.commitments.values()
    }

    pub fn revealed(&self, id: &Hash32) -> Option<&RevealedData> {
        self.revealed.get(id)
    }

    pub fn is_revealed(&self, id: &Hash32) -> bool {
        self.revealed.contains_key(id)
    }

    pub fn disputes(&self) -> &[Dispute] {
        &self.disputes
    }

    pub fn overdue(&self) -> &BTreeSet<Hash32> {
        &self.overdue
    }

    /// Open commitment `id` with `secret`, emitted by `emitter` at turn `now`.
    /// A mismatch blames the emitter and opens a dispute.
    pub fn reveal(
        &mut self,
        id: &Hash32,
        secret: &RevealSecret,
        emitter: &NodeId,
        now: u64,
    ) -> Result<RevealedData, RevealError> {
        let c = self.commitments.get(id).ok_or(RevealError::Unknown(*id))?;
        if self.revealed.contains_key(id) {
            return Err(RevealError::AlreadyRevealed(*id));
        }
        if now > c.due_turn() {
            let due = c.due_turn();
            if self.overdue.insert(*id) {
                self.disputes.push(Dispute::open(
                    c.owner.clone(),
                    DisputeReason::RevealOverdue { commitment: *id },
                    now,
                ));
            }
            return Err(RevealError::DeadlineExceeded { due, now });
        }
        let Some(data) = c.open(secret) else {
            self.disputes.push(Dispute::open(
                emitter.clone(),
                DisputeReason::RevealMismatch { commitment: *id },
                now,
            ));
            return Err(RevealError::Mismatch {
                blamed: emitter.clone(),
            });
        };
        let out = RevealedData {
            commitment: *id,
            owner: c.owner.clone(),
            bloat: c.bloat || data.starts_with(BLOAT_MARKER),
            data,
        };
        self.revealed.insert(*id, out.clone());
        Ok(out)
    }

    pub fn reveal_tx(&mut self, tx: &Transaction, now: u64) -> Result<RevealedData, RevealError> {
        let (target, secret) = RevealSecret::from_tx(tx).ok_or(RevealError::Malformed)?;
        self.reveal(&target, &secret, &tx.author, now)
    }

    /// Flag every unrevealed commitment whose deadline passed before `now`.
    pub fn expire(&mut self, now: u64) -> Vec<Hash32> {
        let late: Vec<_> = self
            .commitments
            .values()
            .filter(|c| {
                now > c.due_turn()
                    && !self.revealed.contains_key(&c.id)
                    && !self.overdue.contains(&c.id)
            })
            .map(|c| (c.id, c.owner.clone()))
            .collect();
        for (id, owner) in &late {
            self.overdue.insert(*id);
            self.disputes.push(Dispute::open(
                owner.clone(),
                DisputeReason::RevealOverdue { commitment: *id },
                now,
            ));
        }
        late.into_iter().map(|(id, _)| id).collect()
    }
}

/// Try every candidate against an unsalted game hash.
pub fn brute_force<'a>(
    digest: &Hash32,
    candidates: impl IntoIterator<Item = &'a [u8]>,
) -> Option<&'a [u8]> {
    candidates
        .into_iter()
        .find(|c| game_hash(c, None) == *digest)
}
