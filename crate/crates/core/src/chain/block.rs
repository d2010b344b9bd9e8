use super::hash::{sha256, Hash32};
use super::identity::{verify_signature, NodeId, NodeKey, Signature};
use super::tx::Transaction;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum BlockKind {
    Genesis = 0,
    Data = 1,
    Handover = 2,
    Finalizing = 3,
    MetaStateGenesis = 4,
}

impl BlockKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => BlockKind::Genesis,
            1 => BlockKind::Data,
            2 => BlockKind::Handover,
            3 => BlockKind::Finalizing,
            4 => BlockKind::MetaStateGenesis,
            _ => return None,
        })
    }

    /// Blocks that end a turn.
    pub fn is_transition(self) -> bool {
        matches!(self, BlockKind::Handover | BlockKind::Finalizing)
    }

    pub fn is_genesis(self) -> bool {
        matches!(self, BlockKind::Genesis | BlockKind::MetaStateGenesis)
    }

    pub fn required_signatures(self) -> usize {
        match self {
            BlockKind::Genesis => 0,
            BlockKind::Handover => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSignature {
    pub signer: NodeId,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Hash32,
    pub author: NodeId,
    pub turn_index: u64,
    pub logical_time: Tick,
    pub kind: BlockKind,
    pub transactions: Vec<Transaction>,
    pub signatures: Vec<BlockSignature>,
}

impl Block {
    /// An unsigned block; sign with [`Block::sign`].
    pub fn new(
        height: u64,
        prev_hash: Hash32,
        author: NodeId,
        turn_index: u64,
        logical_time: Tick,
        kind: BlockKind,
        transactions: Vec<Transaction>,
    ) -> Self {
        Block {
            height,
            prev_hash,
            author,
            turn_index,
            logical_time,
            kind,
            transactions,
            signatures: Vec::new(),
        }
    }

    pub fn hash(&self) -> Hash32 {
        hash_block(self)
    }

    /// Append a signature over the block digest.
    pub fn sign(&mut self, key: &NodeKey) {
        let digest = self.hash();
        self.signatures.push(BlockSignature {
            signer: key.id().clone(),
            signature: key.sign(&digest.0),
        });
    }

    pub fn signed(mut self, key: &NodeKey) -> Self {
        self.sign(key);
        self
    }

    pub fn signature_valid(&self, sig: &BlockSignature) -> bool {
        verify_signature(&sig.signer.public_key, &self.hash().0, &sig.signature)
    }

    /// Sum of declared transaction sizes.
    pub fn payload_size(&self) -> u64 {
        self.transactions.iter().map(|t| t.declared_size).sum()
    }

    fn encode_header(&self, e: &mut Encoder) {
        e.u64(self.height).raw(&self.prev_hash.0);
        self.author.encode(e);
        e.u64(self.turn_index)
            .u64(self.logical_time)
            .u8(self.kind.code())
            .u64(self.transactions.len() as u64);
        for tx in &self.transactions {
            tx.encode(e);
        }
    }

    pub fn encode(&self, e: &mut Encoder) {
        self.encode_header(e);
        e.u64(self.signatures.len() as u64);
        for s in &self.signatures {
            s.signer.encode(e);
            e.raw(&s.signature);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        self.encode(&mut e);
        e.finish()
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let height = d.u64()?;
        let prev_hash = Hash32(d.array()?);
        let author = NodeId::decode(d)?;
        let turn_index = d.u64()?;
        let logical_time = d.u64()?;
        let kind = BlockKind::from_code(d.u8()?).ok_or_else(|| d.invalid("unknown block kind"))?;
        let tx_count = d.u64()?;
        let mut transactions = Vec::new();
        for _ in 0..tx_count {
            transactions.push(Transaction::decode(d)?);
        }
        let sig_count = d.u64()?;
        let mut signatures = Vec::new();
        for _ in 0..sig_count {
            let signer = NodeId::decode(d)?;
            signatures.push(BlockSignature {
                signer,
                signature: d.array()?,
            });
        }
        Ok(Block {
            height,
            prev_hash,
            author,
            turn_index,
            logical_time,
            kind,
            transactions,
            signatures,
        })
    }
}

/// Digest of the canonical header and body; signatures are excluded.
pub fn hash_block(block: &Block) -> Hash32 {
    let mut e = Encoder::new();
    block.encode_header(&mut e);
    sha256(&e.finish())
}
