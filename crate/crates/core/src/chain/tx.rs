use rand::RngCore;
use thiserror::Error;

use super::hash::{sha256, Hash32};
use super::identity::{verify_signature, NodeId, NodeKey, Signature};
use crate::codec::{DecodeError, Decoder, Encoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum TransactionKind {
    Payload = 0,
    HiddenEncrypted = 1,
    HiddenGameHash = 2,
    Bloat = 3,
    RevealKey = 4,
    RevealPreimage = 5,
    RandomCall = 6,
    RandomCommit = 7,
    RandomReveal = 8,
    VoteCall = 9,
    VoteBallot = 10,
    Dispute = 11,
    TriggerClaim = 12,
    JoinProposal = 13,
    LeaveNotice = 14,
    DrawClaim = 15,
    FogReport = 16,
}

impl TransactionKind {
    pub const ALL: [TransactionKind; 17] = [
        TransactionKind::Payload,
        TransactionKind::HiddenEncrypted,
        TransactionKind::HiddenGameHash,
        TransactionKind::Bloat,
        TransactionKind::RevealKey,
        TransactionKind::RevealPreimage,
        TransactionKind::RandomCall,
        TransactionKind::RandomCommit,
        TransactionKind::RandomReveal,
        TransactionKind::VoteCall,
        TransactionKind::VoteBallot,
        TransactionKind::Dispute,
        TransactionKind::TriggerClaim,
        TransactionKind::JoinProposal,
        TransactionKind::LeaveNotice,
        TransactionKind::DrawClaim,
        TransactionKind::FogReport,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Hidden data that a later reveal opens.
    pub fn is_commitment(self) -> bool {
        matches!(
            self,
            Self::HiddenEncrypted | Self::HiddenGameHash | Self::Bloat
        )
    }

    pub fn is_reveal(self) -> bool {
        matches!(self, Self::RevealKey | Self::RevealPreimage)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TxError {
    #[error("body of {body} bytes exceeds pad target {pad_to}")]
    PadTooSmall { body: usize, pad_to: u64 },
    #[error("transaction id does not match its contents")]
    IdMismatch,
    #[error("transaction signature does not verify under its author")]
    BadSignature,
    #[error("declared size {declared} differs from stored size {actual}")]
    SizeMismatch { declared: u64, actual: u64 },
}

/// A signed chain element. `padding` carries the random filler added by
/// [`make_transaction`] so that `declared_size` can match a target size
/// without disturbing the body schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub id: Hash32,
    pub author: NodeId,
    pub kind: TransactionKind,
    pub body: Vec<u8>,
    pub padding: Vec<u8>,
    pub declared_size: u64,
    pub signature: Signature,
}

impl Transaction {
    pub fn compute_id(
        author: &NodeId,
        kind: TransactionKind,
        body: &[u8],
        padding: &[u8],
    ) -> Hash32 {
        let mut e = Encoder::new();
        e.raw(&author.public_key)
            .u8(kind.code())
            .bytes(body)
            .bytes(padding);
        sha256(&e.finish())
    }

    fn signing_message(id: &Hash32, kind: TransactionKind, body: &[u8]) -> Vec<u8> {
        let mut e = Encoder::new();
        e.raw(&id.0).u8(kind.code()).bytes(body);
        e.finish()
    }

    pub fn check(&self) -> Result<(), TxError> {
        if Self::compute_id(&self.author, self.kind, &self.body, &self.padding) != self.id {
            return Err(TxError::IdMismatch);
        }
        let actual = (self.body.len() + self.padding.len()) as u64;
        if actual != self.declared_size {
            return Err(TxError::SizeMismatch {
                declared: self.declared_size,
                actual,
            });
        }
        let msg = Self::signing_message(&self.id, self.kind, &self.body);
        if !verify_signature(&self.author.public_key, &msg, &self.signature) {
            return Err(TxError::BadSignature);
        }
        Ok(())
    }

    /// Bytes this transaction occupies in the canonical encoding.
    pub fn encoded_len(&self) -> usize {
        let mut e = Encoder::new();
        self.encode(&mut e);
        e.len()
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.raw(&self.id.0);
        self.author.encode(e);
        e.u8(self.kind.code())
            .bytes(&self.body)
            .bytes(&self.padding)
            .u64(self.declared_size)
            .raw(&self.signature);
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let id = Hash32(d.array()?);
        let author = NodeId::decode(d)?;
        let code = d.u8()?;
        let kind = TransactionKind::from_code(code)
            .ok_or_else(|| d.invalid("unknown transaction kind"))?;
        Ok(Transaction {
            id,
            author,
            kind,
            body: d.bytes()?,
            padding: d.bytes()?,
            declared_size: d.u64()?,
            signature: d.array()?,
        })
    }
}

/// Build and sign a transaction. With `pad_to`, random filler brings the
/// declared size up to exactly `pad_to` bytes.
pub fn make_transaction<R: RngCore>(
    author: &NodeKey,
    kind: TransactionKind,
    body: Vec<u8>,
    pad_to: Option<u64>,
    rng: &mut R,
) -> Result<Transaction, TxError> {
    let padding = match pad_to {
        Some(target) if body.len() as u64 > target => {
            return Err(TxError::PadTooSmall {
                body: body.len(),
                pad_to: target,
            });
        }
        Some(target) => {
            let mut p = vec![0u8; (target - body.len() as u64) as usize];
            rng.fill_bytes(&mut p);
            p
        }
        None => Vec::new(),
    };
    let id = Transaction::compute_id(author.id(), kind, &body, &padding);
    let signature = author.sign(&Transaction::signing_message(&id, kind, &body));
    Ok(Transaction {
        id,
        author: author.id().clone(),
        kind,
        declared_size: (body.len() + padding.len()) as u64,
        body,
        padding,
        signature,
    })
}

/// Reveal bodies start with the 32-byte id of the commitment they open.
pub fn reveal_target(tx: &Transaction) -> Option<Hash32> {
    if !tx.kind.is_reveal() || tx.body.len() < 32 {
        return None;
    }
    Some(Hash32(tx.body[..32].try_into().expect("32 bytes")))
}
