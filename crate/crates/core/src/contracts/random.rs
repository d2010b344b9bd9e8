//! Commit-reveal randomization. Contributors commit to values, reveal
//! them, and the sum of all valid reveals seeds a fixed generator.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::{open_sealed, seal};
use crate::chain::{sha256_parts, Hash32, NodeId};
use crate::Tick;

/// One step of the splitmix64 generator starting from `state`.
pub fn mix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.state);
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        out
    }

    /// Value in `low..=high` by modulo reduction.
    pub fn next_in(&mut self, low: u64, high: u64) -> u64 {
        let span = high - low;
        if span == u64::MAX {
            return self.next_u64();
        }
        low + self.next_u64() % (span + 1)
    }
}

/// How the seed becomes an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reading {
    /// The seed initialises the generator, which draws from the range.
    #[default]
    SeededPrng,
    /// The seed is the upper bound of `1..=seed`; a generator with the
    /// given fixed state draws from it.
    SeedAsRange { static_state: u64 },
}

impl Reading {
    pub fn output(&self, seed: u64, low: u64, high: u64) -> u64 {
        match *self {
            Reading::SeededPrng => SplitMix64::new(seed).next_in(low, high),
            Reading::SeedAsRange { static_state } => {
                SplitMix64::new(static_state).next_in(1, seed.max(1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RevealMode {
    #[default]
    Broadcast,
    /// Values go encrypted to the initiator during the window; the keys
    /// are published once it closes, so no one can react to others' values.
    PrivateToInitiator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopCondition {
    #[default]
    AllOrDeadline,
    /// Finish as soon as one contributor besides the initiator answered.
    AtLeastOne,
}

pub fn random_commit(value: u64, salt: &[u8; 16]) -> Hash32 {
    sha256_parts(&[&value.to_le_bytes(), salt])
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RandomError {
    #[error("initiator {0} did not reveal")]
    InitiatorSilent(String),
    #[error("{0} has no commitment in this session")]
    NotCommitted(String),
    #[error("{0} already committed")]
    AlreadyCommitted(String),
    #[error("{0} already revealed")]
    AlreadyRevealed(String),
    #[error("reveal of {} does not match its commitment", blamed.label)]
    Mismatch { blamed: NodeId },
    #[error("window closed at tick {0}")]
    WindowClosed(Tick),
    #[error("window still open until tick {0}")]
    WindowOpen(Tick),
    #[error("session still waiting for contributors")]
    NotFinished,
    #[error("operation not available in this reveal mode")]
    WrongMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomOutput {
    pub seed: u64,
    pub value: u64,
    pub contributors: Vec<NodeId>,
    /// Committed nodes whose value is missing from the seed.
    pub excluded: Vec<NodeId>,
    /// Finished early under `AtLeastOne` while others were still silent.
    pub stalled: bool,
}

#[derive(Debug, Clone)]
pub struct RandomizationSession {
    pub id: Hash32,
    pub initiator: NodeId,
    pub low: u64,
    pub high: u64,
    pub reading: Reading,
    pub mode: RevealMode,
    pub stop: StopCondition,
    pub deadline: Tick,
    commits: BTreeMap<NodeId, Hash32>,
    sealed: BTreeMap<NodeId, Vec<u8>>,
    reveals: BTreeMap<NodeId, u64>,
}

impl RandomizationSession {
    pub fn new(initiator: NodeId, low: u64, high: u64, deadline: Tick) -> Self {
        let id = sha256_parts(&[
            &initiator.public_key,
            &low.to_le_bytes(),
            &high.to_le_bytes(),
            &deadline.to_le_bytes(),
        ]);
        RandomizationSession {
            id,
            initiator,
            low,
            high,
            reading: Reading::default(),
            mode: RevealMode::default(),
            stop: StopCondition::default(),
            deadline,
            commits: BTreeMap::new(),
            sealed: BTreeMap::new(),
            reveals: BTreeMap::new(),
        }
    }

    pub fn with_reading(mut self, reading: Reading) -> Self {
        self.reading = reading;
        self
    }

    pub fn with_mode(mut self, mode: RevealMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_stop(mut self, stop: StopCondition) -> Self {
        self.stop = stop;
        self
    }

    pub fn commits(&self) -> &BTreeMap<NodeId, Hash32> {
        &self.commits
    }

    pub fn reveals(&self) -> &BTreeMap<NodeId, u64> {
        &self.reveals
    }

    pub fn commit(&mut self, node: &NodeId, digest: Hash32, now: Tick) -> Result<(), RandomError> {
        if now > self.deadline {
            return Err(RandomError::WindowClosed(self.deadline));
        }
        if self.commits.contains_key(node) {
            return Err(RandomError::AlreadyCommitted(node.label.clone()));
        }
        self.commits.insert(node.clone(), digest);
        Ok(())
    }

    fn check(&self, node: &NodeId, value: u64, salt: &[u8; 16]) -> Result<(), RandomError> {
        let c = self
            .commits
            .get(node)
            .ok_or_else(|| RandomError::NotCommitted(node.label.clone()))?;
        if self.reveals.contains_key(node) {
            return Err(RandomError::AlreadyRevealed(node.label.clone()));
        }
        if random_commit(value, salt) != *c {
            return Err(RandomError::Mismatch {
                blamed: node.clone(),
            });
        }
        Ok(())
    }

    /// Public reveal, broadcast mode only.
    pub fn reveal(
        &mut self,
        node: &NodeId,
        value: u64,
        salt: &[u8; 16],
        now: Tick,
    ) -> Result<(), RandomError> {
        if self.mode != RevealMode::Broadcast {
            return Err(RandomError::WrongMode);
        }
        if now > self.deadline {
            return Err(RandomError::WindowClosed(self.deadline));
        }
        self.check(node, value, salt)?;
        self.reveals.insert(node.clone(), value);
        Ok(())
    }

    /// Hand the initiator an encrypted reveal during the window.
    pub fn deliver_sealed(
        &mut self,
        node: &NodeId,
        sealed: Vec<u8>,
        now: Tick,
    ) -> Result<(), RandomError> {
        if self.mode != RevealMode::PrivateToInitiator {
            return Err(RandomError::WrongMode);
        }
        if now > self.deadline {
            return Err(RandomError::WindowClosed(self.deadline));
        }
        if !self.commits.contains_key(node) {
            return Err(RandomError::NotCommitted(node.label.clone()));
        }
        self.sealed.insert(node.clone(), sealed);
        Ok(())
    }

    /// Publish the key of a sealed reveal once the window is over.
    pub fn publish_key(
        &mut self,
        node: &NodeId,
        key: &[u8; 32],
        now: Tick,
    ) -> Result<(), RandomError> {
        if self.mode != RevealMode::PrivateToInitiator {
            return Err(RandomError::WrongMode);
        }
        if now <= self.deadline {
            return Err(RandomError::WindowOpen(self.deadline));
        }
        let sealed = self
            .sealed
            .get(node)
            .ok_or_else(|| RandomError::NotCommitted(node.label.clone()))?;
        let plain = open_sealed(key, sealed).ok_or_else(|| RandomError::Mismatch {
            blamed: node.clone(),
        })?;
        if plain.len() != 24 {
            return Err(RandomError::Mismatch {
                blamed: node.clone(),
            });
        }
        let value = u64::from_le_bytes(plain[..8].try_into().expect("8 bytes"));
        let salt: [u8; 16] = plain[8..].try_into().expect("16 bytes");
        self.check(node, value, &salt)?;
        self.reveals.insert(node.clone(), value);
        Ok(())
    }

    /// Finish the session. The initiator must have revealed; other silent
    /// committers are left out of the seed.
    pub fn run(&self, now: Tick) -> Result<RandomOutput, RandomError> {
        let others_revealed = self
            .reveals
            .keys()
            .filter(|n| **n != self.initiator)
            .count();
        let all = self.commits.keys().all(|n| self.reveals.contains_key(n));
        let closed = now > self.deadline || (self.mode == RevealMode::Broadcast && all);
        let early_ok = self.stop == StopCondition::AtLeastOne
            && others_revealed >= 1
            && self.mode == RevealMode::Broadcast;
        if !closed && !early_ok {
            return Err(RandomError::NotFinished);
        }
        if !self.reveals.contains_key(&self.initiator) {
            return Err(RandomError::InitiatorSilent(self.initiator.label.clone()));
        }
        let seed = self
            .reveals
            .values()
            .fold(0u64, |acc, v| acc.wrapping_add(*v));
        let excluded: Vec<_> = self
            .commits
            .keys()
            .filter(|n| !self.reveals.contains_key(*n))
            .cloned()
            .collect();
        Ok(RandomOutput {
            seed,
            value: self.reading.output(seed, self.low, self.high),
            contributors: self.reveals.keys().cloned().collect(),
            stalled: !excluded.is_empty() && !closed,
            excluded,
        })
    }
}

/// A contributor's value and salt, with helpers for both reveal modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contribution {
    pub value: u64,
    pub salt: [u8; 16],
}

impl Contribution {
    pub fn new<R: RngCore>(value: u64, rng: &mut R) -> Self {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        Contribution { value, salt }
    }

    pub fn digest(&self) -> Hash32 {
        random_commit(self.value, &self.salt)
    }

    pub fn seal<R: RngCore + CryptoRng>(&self, rng: &mut R) -> (Vec<u8>, [u8; 32]) {
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let mut plain = self.value.to_le_bytes().to_vec();
        plain.extend_from_slice(&self.salt);
        (seal(&key, &plain), key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_first_output() {
        assert_eq!(SplitMix64::new(1522).next_u64(), 1271626993162961145);
        assert_eq!(mix64(1522), 1271626993162961145);
    }

    #[test]
    fn seed_as_range_stays_in_bounds() {
        let r = Reading::SeedAsRange { static_state: 0 };
        for seed in [1, 2, 1522, u64::MAX] {
            let v = r.output(seed, 0, 0);
            assert!((1..=seed).contains(&v));
        }
    }
}
