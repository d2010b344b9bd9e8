//! Shared pile with private draws. Party A creates one X25519 key pair
//! per card, B shuffles the plain deck and encrypts every card to one of
//! A's public keys, then C and any further parties shuffle again and wrap
//! each position under a fresh symmetric key. A draw walks the layers
//! back, each party releasing a key only for a matching claim.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use super::{open_sealed, seal};
use crate::chain::{sha256, sha256_parts, Hash32, NodeId};

pub type Card = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeckError {
    #[error("a shuffle needs at least three parties, got {0}")]
    TooFewParties(usize),
    #[error("{0} holds more than one role")]
    RoleCollision(String),
    #[error("index {0} already drawn")]
    AlreadyDrawn(usize),
    #[error("claim rejected by {party} at index {index}")]
    InvalidClaim { party: String, index: usize },
    #[error("empty deck")]
    EmptyDeck,
}

/// Public record of a finished shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeckCommitment {
    pub parties: Vec<NodeId>,
    pub card_count: usize,
    /// A's public keys in B's position order.
    pub key_tags: Vec<Hash32>,
    pub published_pile: Vec<Vec<u8>>,
    drawn: BTreeSet<usize>,
}

impl DeckCommitment {
    pub fn drawn(&self) -> &BTreeSet<usize> {
        &self.drawn
    }

    pub fn remaining(&self) -> usize {
        self.card_count - self.drawn.len()
    }

    pub fn digest(&self) -> Hash32 {
        let mut parts: Vec<&[u8]> = Vec::new();
        for c in &self.published_pile {
            parts.push(c);
        }
        sha256_parts(&parts)
    }

    /// Draw `index` privately: the index becomes public, the card is only
    /// seen by the claimant walking the chain.
    pub fn draw(&mut self, index: usize, secrets: &DeckSecrets) -> Result<ClaimChain, DeckError> {
        if self.drawn.contains(&index) {
            return Err(DeckError::AlreadyDrawn(index));
        }
        let chain = claim_chain(self, secrets, index)?;
        self.drawn.insert(index);
        Ok(chain)
    }
}

/// Party A: the per-card private keys.
#[derive(Clone)]
pub struct KeyHolder {
    pub party: NodeId,
    secrets: Vec<StaticSecret>,
}

impl KeyHolder {
    pub fn generate<R: RngCore + CryptoRng>(party: NodeId, m: usize, rng: &mut R) -> Self {
        let secrets = (0..m)
            .map(|_| StaticSecret::random_from_rng(&mut *rng))
            .collect();
        KeyHolder { party, secrets }
    }

    pub fn public_keys(&self) -> Vec<[u8; 32]> {
        self.secrets
            .iter()
            .map(|s| PublicKey::from(s).to_bytes())
            .collect()
    }

    /// Release private key `index` if `tag` is the hash of its public key.
    pub fn release(&self, index: usize, tag: &Hash32) -> Result<[u8; 32], DeckError> {
        let invalid = || DeckError::InvalidClaim {
            party: self.party.label.clone(),
            index,
        };
        let s = self.secrets.get(index).ok_or_else(invalid)?;
        if sha256(PublicKey::from(s).as_bytes()) != *tag {
            return Err(invalid());
        }
        Ok(s.to_bytes())
    }
}

/// Party B: knows its shuffle of the plain deck and nothing else.
#[derive(Debug, Clone)]
pub struct FirstShuffler {
    pub party: NodeId,
    pub permutation: Vec<usize>,
}

/// Party C and later: a shuffle plus one symmetric key per output position.
#[derive(Debug, Clone)]
pub struct LayerShuffler {
    pub party: NodeId,
    pub permutation: Vec<usize>,
    keys: Vec<[u8; 32]>,
    produced: Vec<Vec<u8>>,
}

impl LayerShuffler {
    /// Release the key of position `index` when `ciphertext` is exactly
    /// what this party produced there.
    pub fn release(&self, index: usize, ciphertext: &[u8]) -> Result<[u8; 32], DeckError> {
        match self.produced.get(index) {
            Some(c) if c.as_slice() == ciphertext => Ok(self.keys[index]),
            _ => Err(DeckError::InvalidClaim {
                party: self.party.label.clone(),
                index,
            }),
        }
    }

    pub fn keys(&self) -> &[[u8; 32]] {
        &self.keys
    }
}

#[derive(Clone)]
pub struct DeckSecrets {
    pub a: KeyHolder,
    pub b: FirstShuffler,
    /// C first, then any additional parties in order.
    pub layers: Vec<LayerShuffler>,
}

/// Test-only escrow of every party's secrets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeckEscrow {
    pub a_private_keys: Vec<String>,
    /// B's permutation first, then each layer's.
    pub permutations: Vec<Vec<usize>>,
    pub layer_keys: Vec<Vec<String>>,
}

impl DeckSecrets {
    pub fn escrow(&self) -> DeckEscrow {
        let mut permutations = vec![self.b.permutation.clone()];
        permutations.extend(self.layers.iter().map(|l| l.permutation.clone()));
        DeckEscrow {
            a_private_keys: self
                .a
                .secrets
                .iter()
                .map(|s| hex::encode(s.to_bytes()))
                .collect(),
            permutations,
            layer_keys: self
                .layers
                .iter()
                .map(|l| l.keys.iter().map(hex::encode).collect())
                .collect(),
        }
    }
}

impl DeckEscrow {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("escrow serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Source card behind published index `i`, by composing the shuffles.
    /// Each shuffle maps output position q to input position `perm[q]`.
    pub fn source_index(&self, i: usize) -> usize {
        self.permutations
            .iter()
            .rev()
            .fold(i, |idx, perm| perm[idx])
    }
}

fn first_layer_key(shared: &[u8; 32], ephemeral: &[u8; 32]) -> [u8; 32] {
    sha256_parts(&[b"POT-DECK", shared, ephemeral]).0
}

fn random_permutation<R: RngCore>(m: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

pub fn shuffle_deck<R: RngCore + CryptoRng>(
    parties: &[NodeId],
    source: &[Card],
    rng: &mut R,
) -> Result<(DeckCommitment, DeckSecrets), DeckError> {
    if parties.len() < 3 {
        return Err(DeckError::TooFewParties(parties.len()));
    }
    for (i, p) in parties.iter().enumerate() {
        if parties[..i].contains(p) {
            return Err(DeckError::RoleCollision(p.label.clone()));
        }
    }
    let m = source.len();
    if m == 0 {
        return Err(DeckError::EmptyDeck);
    }

    let a = KeyHolder::generate(parties[0].clone(), m, rng);
    let a_public = a.public_keys();

    // B: shuffle the plain deck, encrypt position q to A's key q.
    let b_perm = random_permutation(m, rng);
    let mut pile: Vec<Vec<u8>> = (0..m)
        .map(|q| {
            let eph = StaticSecret::random_from_rng(&mut *rng);
            let eph_pub = PublicKey::from(&eph).to_bytes();
            let shared = eph.diffie_hellman(&PublicKey::from(a_public[q]));
            let key = first_layer_key(shared.as_bytes(), &eph_pub);
            let mut item = eph_pub.to_vec();
            item.extend(seal(&key, &source[b_perm[q]].to_le_bytes()));
            item
        })
        .collect();
    let b = FirstShuffler {
        party: parties[1].clone(),
        permutation: b_perm,
    };

    // C, D, ...: shuffle and wrap. C also embeds A's key tag so the tag
    // only surfaces once C has released its key.
    let mut layers = Vec::new();
    for (li, party) in parties[2..].iter().enumerate() {
        let perm = random_permutation(m, rng);
        let mut keys = Vec::with_capacity(m);
        let produced: Vec<Vec<u8>> = (0..m)
            .map(|q| {
                let prev = perm[q];
                let mut plain = pile[prev].clone();
                if li == 0 {
                    plain.extend_from_slice(&sha256(&a_public[prev]).0);
                }
                plain.extend_from_slice(&(prev as u64).to_le_bytes());
                let mut key = [0u8; 32];
                rng.fill_bytes(&mut key);
                keys.push(key);
                seal(&key, &plain)
            })
            .collect();
        pile = produced.clone();
        layers.push(LayerShuffler {
            party: party.clone(),
            permutation: perm,
            keys,
            produced,
        });
    }

    let deck = DeckCommitment {
        parties: parties.to_vec(),
        card_count: m,
        key_tags: a_public.iter().map(|p| sha256(p)).collect(),
        published_pile: pile,
        drawn: BTreeSet::new(),
    };
    Ok((deck, DeckSecrets { a, b, layers }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimStep {
    pub party: NodeId,
    /// Index presented at this party's layer.
    pub index: usize,
    pub key: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimChain {
    pub index: usize,
    pub steps: Vec<ClaimStep>,
    pub tag: Hash32,
    /// Position of the card in B's output, also the index of A's key.
    pub key_index: usize,
    pub card: Card,
}

/// Walk all layers for published index `index` without marking it drawn.
pub fn claim_chain(
    deck: &DeckCommitment,
    secrets: &DeckSecrets,
    index: usize,
) -> Result<ClaimChain, DeckError> {
    let top = secrets
        .layers
        .last()
        .map(|l| l.party.label.clone())
        .unwrap_or_default();
    let mut ct = deck
        .published_pile
        .get(index)
        .cloned()
        .ok_or(DeckError::InvalidClaim { party: top, index })?;
    let mut idx = index;
    let mut steps = Vec::new();
    let mut tag = Hash32::ZERO;
    for (li, layer) in secrets.layers.iter().enumerate().rev() {
        let invalid = || DeckError::InvalidClaim {
            party: layer.party.label.clone(),
            index: idx,
        };
        let key = layer.release(idx, &ct)?;
        steps.push(ClaimStep {
            party: layer.party.clone(),
            index: idx,
            key,
        });
        let mut plain = open_sealed(&key, &ct).ok_or_else(invalid)?;
        let tail = if li == 0 { 40 } else { 8 };
        if plain.len() < tail {
            return Err(invalid());
        }
        let prev =
            u64::from_le_bytes(plain[plain.len() - 8..].try_into().expect("8 bytes")) as usize;
        if li == 0 {
            tag = Hash32(
                plain[plain.len() - 40..plain.len() - 8]
                    .try_into()
                    .expect("32 bytes"),
            );
        }
        plain.truncate(plain.len() - tail);
        ct = plain;
        idx = prev;
    }
    let a_key = secrets.a.release(idx, &tag)?;
    steps.push(ClaimStep {
        party: secrets.a.party.clone(),
        index: idx,
        key: a_key,
    });
    let invalid = || DeckError::InvalidClaim {
        party: secrets.a.party.label.clone(),
        index: idx,
    };
    if ct.len() < 32 {
        return Err(invalid());
    }
    let eph_pub: [u8; 32] = ct[..32].try_into().expect("32 bytes");
    let shared = StaticSecret::from(a_key).diffie_hellman(&PublicKey::from(eph_pub));
    let plain = open_sealed(&first_layer_key(shared.as_bytes(), &eph_pub), &ct[32..])
        .ok_or_else(invalid)?;
    let card = Card::from_le_bytes(plain.as_slice().try_into().map_err(|_| invalid())?);
    Ok(ClaimChain {
        index,
        steps,
        tag,
        key_index: idx,
        card,
    })
}
