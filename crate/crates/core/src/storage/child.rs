//! Child chains hold hidden transactions until they are revealed. A reveal
//! puts the key on the child and the plain residue on the main chain; a
//! child whose entries are all revealed or obsolete can be dropped locally.

use std::collections::BTreeMap;

use thiserror::Error;

use super::params::bytes_to_mb;
use crate::chain::{Hash32, Transaction};
use crate::consensus::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildState {
    Open,
    Full,
    Deletable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildEntry {
    pub commitment: Hash32,
    pub size: Fraction,
    pub key: Option<Vec<u8>>,
    pub obsolete: bool,
}

impl ChildEntry {
    fn settled(&self) -> bool {
        self.key.is_some() || self.obsolete
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildChain {
    pub id: u64,
    pub capacity: Fraction,
    pub used: Fraction,
    pub entries: Vec<ChildEntry>,
    pub state: ChildState,
}

impl ChildChain {
    fn new(id: u64, capacity: Fraction) -> Self {
        ChildChain {
            id,
            capacity,
            used: Fraction::from_integer(0),
            entries: Vec::new(),
            state: ChildState::Open,
        }
    }

    fn refresh(&mut self) {
        if self.state == ChildState::Full && self.entries.iter().all(ChildEntry::settled) {
            self.state = ChildState::Deletable;
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChildError {
    #[error("child {child} filled up while routing; retry on child {retry}")]
    ChildFullRace { child: u64, retry: u64 },
    #[error("entry of {size} MB exceeds the child capacity")]
    EntryTooLarge { size: Fraction },
    #[error("no child holds commitment {0}")]
    UnknownCommitment(Hash32),
    #[error("commitment {0} already revealed")]
    AlreadyRevealed(Hash32),
    #[error("residue does not verify under its emitter")]
    BadResidue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcPolicy {
    Delete,
    /// Keep deletable children around; it has no protocol effect.
    Keep,
}

/// One node's view of its child chains and the residues on the main chain.
#[derive(Debug, Clone)]
pub struct ChildManager {
    pub capacity: Fraction,
    children: BTreeMap<u64, ChildChain>,
    residues: Vec<Transaction>,
    next_id: u64,
}

impl ChildManager {
    pub fn new(capacity: Fraction) -> Self {
        let mut m = ChildManager {
            capacity,
            children: BTreeMap::new(),
            residues: Vec::new(),
            next_id: 1,
        };
        m.open_next();
        m
    }

    fn open_next(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.children.insert(id, ChildChain::new(id, self.capacity));
        id
    }

    pub fn open_child(&self) -> u64 {
        self.children
            .values()
            .rev()
            .find(|c| c.state == ChildState::Open)
            .map(|c| c.id)
            .expect("one child is always open")
    }

    pub fn children(&self) -> impl Iterator<Item = &ChildChain> {
        self.children.values()
    }

    pub fn child(&self, id: u64) -> Option<&ChildChain> {
        self.children.get(&id)
    }

    pub fn residues(&self) -> &[Transaction] {
        &self.residues
    }

    /// Stored size of all children still held, MB.
    pub fn stored(&self) -> Fraction {
        self.children.values().map(|c| c.used).sum()
    }

    /// Route a hidden transaction by its declared size.
    pub fn route_to_child(&mut self, tx: &Transaction) -> Result<u64, ChildError> {
        self.route_entry(tx.id, bytes_to_mb(tx.declared_size))
    }

    /// Route an entry of `size` MB to the open child, rolling over when it
    /// does not fit.
    pub fn route_entry(&mut self, commitment: Hash32, size: Fraction) -> Result<u64, ChildError> {
        let open = self.open_child();
        match self.route_to(open, commitment, size) {
            Err(ChildError::ChildFullRace { retry, .. }) => self.route_to(retry, commitment, size),
            other => other,
        }
    }

    /// Route to a specific child; fails with a race if it is no longer
    /// able to take the entry.
    pub fn route_to(
        &mut self,
        child: u64,
        commitment: Hash32,
        size: Fraction,
    ) -> Result<u64, ChildError> {
        if size > self.capacity {
            return Err(ChildError::EntryTooLarge { size });
        }
        let fits = self
            .children
            .get(&child)
            .is_some_and(|c| c.state == ChildState::Open && c.used + size <= c.capacity);
        if !fits {
            let open = self.open_child();
            let retry = if open == child || self.children[&open].used + size > self.capacity {
                self.seal(open);
                self.open_next()
            } else {
                open
            };
            return Err(ChildError::ChildFullRace { child, retry });
        }
        let c = self.children.get_mut(&child).expect("checked");
        c.used += size;
        c.entries.push(ChildEntry {
            commitment,
            size,
            key: None,
            obsolete: false,
        });
        if c.used == c.capacity {
            self.seal(child);
            self.open_next();
        }
        Ok(child)
    }

    fn seal(&mut self, id: u64) {
        if let Some(c) = self.children.get_mut(&id) {
            if c.state == ChildState::Open {
                c.state = ChildState::Full;
                c.refresh();
            }
        }
    }

    fn entry_mut(&mut self, commitment: &Hash32) -> Option<(&mut ChildChain, usize)> {
        self.children.values_mut().find_map(|c| {
            let i = c.entries.iter().position(|e| e.commitment == *commitment)?;
            Some((c, i))
        })
    }

    /// The key goes onto the child, the residue onto the main chain.
    pub fn reveal_on_child(
        &mut self,
        commitment: &Hash32,
        key: Vec<u8>,
        residue: Transaction,
    ) -> Result<u64, ChildError> {
        if residue.check().is_err() {
            return Err(ChildError::BadResidue);
        }
        let (child, i) = self
            .entry_mut(commitment)
            .ok_or(ChildError::UnknownCommitment(*commitment))?;
        if child.entries[i].key.is_some() {
            return Err(ChildError::AlreadyRevealed(*commitment));
        }
        child.entries[i].key = Some(key);
        child.refresh();
        let id = child.id;
        self.residues.push(residue);
        Ok(id)
    }

    /// Application callback: the commitment no longer matters to the game.
    pub fn mark_obsolete(&mut self, commitment: &Hash32) -> Result<u64, ChildError> {
        let (child, i) = self
            .entry_mut(commitment)
            .ok_or(ChildError::UnknownCommitment(*commitment))?;
        child.entries[i].obsolete = true;
        child.refresh();
        Ok(child.id)
    }

    /// Drop deletable children unless the node keeps them. Returns the ids
    /// that are deletable.
    pub fn gc_children(&mut self, policy: GcPolicy) -> Vec<u64> {
        let ids: Vec<u64> = self
            .children
            .values()
            .filter(|c| c.state == ChildState::Deletable)
            .map(|c| c.id)
            .collect();
        if policy == GcPolicy::Delete {
            for id in &ids {
                self.children.remove(id);
            }
        }
        ids
    }
}
