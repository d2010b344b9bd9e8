use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::codec::{DecodeError, Decoder, Encoder};

pub type Signature = [u8; 64];

/// A network participant. Identity is the public key alone; the label is
/// informational and ignored by equality and ordering.
#[derive(Clone, Serialize, Deserialize)]
pub struct NodeId {
    pub public_key: [u8; 32],
    pub label: String,
}

impl NodeId {
    pub fn new(label: impl Into<String>, public_key: [u8; 32]) -> Self {
        NodeId {
            public_key,
            label: label.into(),
        }
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.raw(&self.public_key).bytes(self.label.as_bytes());
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let public_key = d.array::<32>()?;
        let label = String::from_utf8(d.bytes()?).map_err(|_| d.invalid("label is not utf-8"))?;
        Ok(NodeId { public_key, label })
    }
}

impl PartialEq for NodeId {
    fn eq(&self, other: &Self) -> bool {
        self.public_key == other.public_key
    }
}

impl Eq for NodeId {}

impl Hash for NodeId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.public_key.hash(state);
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.public_key.cmp(&other.public_key)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.label, hex::encode(&self.public_key[..4]))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Signing half of a node identity.
#[derive(Clone)]
pub struct NodeKey {
    signing: SigningKey,
    id: NodeId,
}

impl NodeKey {
    pub fn from_seed(label: impl Into<String>, seed: [u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(&seed);
        let id = NodeId::new(label, signing.verifying_key().to_bytes());
        NodeKey { signing, id }
    }

    pub fn generate<R: RngCore + CryptoRng>(label: impl Into<String>, rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(label, seed)
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        self.signing.sign(msg).to_bytes()
    }
}

impl fmt::Debug for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeKey")
            .field("id", &self.id)
            .finish_non_exhaustive()
    }
}

pub fn verify_signature(public_key: &[u8; 32], msg: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    vk.verify(msg, &ed25519_dalek::Signature::from_bytes(sig))
        .is_ok()
}
