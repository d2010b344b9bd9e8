use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::Fraction;
use crate::chain::{Hash32, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FinalityStatus {
    Pending,
    EffectiveFinal,
    Invalidated,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FinalityError {
    #[error("block is already effectively final")]
    AlreadyFinal,
    #[error("block was invalidated")]
    AlreadyInvalidated,
    #[error("block is not tracked")]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedBlock {
    pub author: NodeId,
    /// Completed turns since publication, the publishing turn included.
    pub turns_completed: u64,
    /// Distinct non-author leaders whose turn completed without a dispute.
    pub passers: BTreeSet<NodeId>,
    pub approvals: BTreeSet<NodeId>,
    pub disputed: bool,
    pub status: FinalityStatus,
}

impl TrackedBlock {
    pub fn silent_passes(&self) -> usize {
        self.passers.len()
    }
}

/// Per-block effective finality accounting.
#[derive(Debug, Clone)]
pub struct FinalityTracker {
    threshold: Fraction,
    active: usize,
    round: u64,
    blocks: BTreeMap<Hash32, TrackedBlock>,
}

impl FinalityTracker {
    /// `active` nodes vote on disputes; a block is final at the latest after
    /// `round` completed turns.
    pub fn new(threshold: Fraction, active: usize, round: u64) -> Self {
        FinalityTracker {
            threshold,
            active: active.max(1),
            round: round.max(1),
            blocks: BTreeMap::new(),
        }
    }

    pub fn threshold(&self) -> Fraction {
        self.threshold
    }

    pub fn set_active(&mut self, active: usize) {
        self.active = active.max(1);
    }

    pub fn set_round(&mut self, round: u64) {
        self.round = round.max(1);
    }

    pub fn track(&mut self, block: Hash32, author: NodeId) {
        self.blocks.entry(block).or_insert(TrackedBlock {
            author,
            turns_completed: 0,
            passers: BTreeSet::new(),
            approvals: BTreeSet::new(),
            disputed: false,
            status: FinalityStatus::Pending,
        });
    }

    pub fn get(&self, block: &Hash32) -> Option<&TrackedBlock> {
        self.blocks.get(block)
    }

    pub fn status(&self, block: &Hash32) -> Option<FinalityStatus> {
        self.blocks.get(block).map(|b| b.status)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Hash32, &TrackedBlock)> {
        self.blocks.iter()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Hash32> {
        self.blocks
            .iter()
            .filter(|(_, b)| b.status == FinalityStatus::Pending)
            .map(|(h, _)| h)
    }

    fn pending_mut(&mut self, block: &Hash32) -> Result<&mut TrackedBlock, FinalityError> {
        let b = self.blocks.get_mut(block).ok_or(FinalityError::Unknown)?;
        match b.status {
            FinalityStatus::Pending => Ok(b),
            FinalityStatus::EffectiveFinal => Err(FinalityError::AlreadyFinal),
            FinalityStatus::Invalidated => Err(FinalityError::AlreadyInvalidated),
        }
    }

    fn settle(
        threshold: Fraction,
        active: usize,
        round: u64,
        b: &mut TrackedBlock,
    ) -> FinalityStatus {
        let covered = b.passers.union(&b.approvals).count() as u64;
        if Fraction::new(covered, active as u64) >= threshold || b.turns_completed >= round {
            b.status = FinalityStatus::EffectiveFinal;
        }
        b.status
    }

    /// A turn led by `completed_turn_author` ended. Silent passes do not
    /// accrue while the block is disputed; the one-round bound still runs.
    pub fn record_pass(
        &mut self,
        block: &Hash32,
        completed_turn_author: &NodeId,
    ) -> Result<FinalityStatus, FinalityError> {
        let (threshold, active, round) = (self.threshold, self.active, self.round);
        let b = self.pending_mut(block)?;
        b.turns_completed += 1;
        if !b.disputed && *completed_turn_author != b.author {
            b.passers.insert(completed_turn_author.clone());
        }
        Ok(Self::settle(threshold, active, round, b))
    }

    pub fn approve(
        &mut self,
        block: &Hash32,
        node: &NodeId,
    ) -> Result<FinalityStatus, FinalityError> {
        let (threshold, active, round) = (self.threshold, self.active, self.round);
        let b = self.pending_mut(block)?;
        if *node != b.author {
            b.approvals.insert(node.clone());
        }
        Ok(Self::settle(threshold, active, round, b))
    }

    pub fn set_disputed(&mut self, block: &Hash32, disputed: bool) -> Result<(), FinalityError> {
        self.pending_mut(block)?.disputed = disputed;
        Ok(())
    }

    /// Apply a passed invalidation vote. Terminal; refused once final.
    pub fn invalidate(&mut self, block: &Hash32) -> Result<(), FinalityError> {
        let b = self.blocks.get_mut(block).ok_or(FinalityError::Unknown)?;
        match b.status {
            FinalityStatus::EffectiveFinal => Err(FinalityError::AlreadyFinal),
            _ => {
                b.status = FinalityStatus::Invalidated;
                Ok(())
            }
        }
    }
}

/// Tracks missed turns to decide which nodes count as active.
#[derive(Debug, Clone, Default)]
pub struct ActivityTracker {
    window: u64,
    missed: BTreeMap<NodeId, u64>,
}

impl ActivityTracker {
    /// A node becomes inactive after missing `window` of its own turns in a row.
    pub fn new(window: u64) -> Self {
        ActivityTracker {
            window: window.max(1),
            missed: BTreeMap::new(),
        }
    }

    pub fn turn_result(&mut self, leader: &NodeId, wrote: bool) {
        if wrote {
            self.missed.remove(leader);
        } else {
            *self.missed.entry(leader.clone()).or_insert(0) += 1;
        }
    }

    pub fn missed(&self, node: &NodeId) -> u64 {
        self.missed.get(node).copied().unwrap_or(0)
    }

    pub fn is_active(&self, node: &NodeId) -> bool {
        self.missed(node) < self.window
    }

    pub fn active<'a>(&self, roster: impl IntoIterator<Item = &'a NodeId>) -> BTreeSet<NodeId> {
        roster
            .into_iter()
            .filter(|n| self.is_active(n))
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<NodeId> {
        (0..n)
            .map(|i| NodeId::new(format!("n{i}"), [i as u8 + 1; 32]))
            .collect()
    }

    #[test]
    fn five_of_ten_passes_finalize() {
        let ids = ids(10);
        let mut t = FinalityTracker::new(Fraction::new(1, 2), 10, 10);
        let h = Hash32([1; 32]);
        t.track(h, ids[0].clone());
        assert_eq!(t.record_pass(&h, &ids[0]).unwrap(), FinalityStatus::Pending);
        for id in &ids[1..5] {
            assert_eq!(t.record_pass(&h, id).unwrap(), FinalityStatus::Pending);
        }
        assert_eq!(
            t.record_pass(&h, &ids[5]).unwrap(),
            FinalityStatus::EffectiveFinal
        );
        assert_eq!(t.get(&h).unwrap().silent_passes(), 5);
        assert_eq!(t.record_pass(&h, &ids[6]), Err(FinalityError::AlreadyFinal));
        assert_eq!(t.invalidate(&h), Err(FinalityError::AlreadyFinal));
    }

    #[test]
    fn full_round_finalizes_even_while_disputed() {
        let ids = ids(4);
        let mut t = FinalityTracker::new(Fraction::new(1, 1), 4, 4);
        let h = Hash32([2; 32]);
        t.track(h, ids[0].clone());
        t.set_disputed(&h, true).unwrap();
        for id in &ids[..3] {
            assert_eq!(t.record_pass(&h, id).unwrap(), FinalityStatus::Pending);
        }
        assert_eq!(t.get(&h).unwrap().silent_passes(), 0);
        assert_eq!(
            t.record_pass(&h, &ids[3]).unwrap(),
            FinalityStatus::EffectiveFinal
        );
    }

    #[test]
    fn invalidated_is_terminal() {
        let ids = ids(10);
        let mut t = FinalityTracker::new(Fraction::new(1, 2), 10, 10);
        let h = Hash32([3; 32]);
        t.track(h, ids[0].clone());
        for id in &ids[1..4] {
            t.record_pass(&h, id).unwrap();
        }
        t.invalidate(&h).unwrap();
        assert_eq!(
            t.record_pass(&h, &ids[5]),
            Err(FinalityError::AlreadyInvalidated)
        );
        assert_eq!(
            t.approve(&h, &ids[6]),
            Err(FinalityError::AlreadyInvalidated)
        );
        assert_eq!(t.status(&h), Some(FinalityStatus::Invalidated));
    }

    #[test]
    fn approvals_and_passes_union() {
        let ids = ids(4);
        let mut t = FinalityTracker::new(Fraction::new(1, 2), 4, 4);
        let h = Hash32([4; 32]);
        t.track(h, ids[0].clone());
        t.approve(&h, &ids[1]).unwrap();
        assert_eq!(t.record_pass(&h, &ids[1]).unwrap(), FinalityStatus::Pending);
        assert_eq!(
            t.approve(&h, &ids[2]).unwrap(),
            FinalityStatus::EffectiveFinal
        );
    }

    #[test]
    fn activity_window() {
        let ids = ids(2);
        let mut a = ActivityTracker::new(2);
        a.turn_result(&ids[0], false);
        assert!(a.is_active(&ids[0]));
        a.turn_result(&ids[0], false);
        assert!(!a.is_active(&ids[0]));
        a.turn_result(&ids[0], true);
        assert_eq!(a.active(&ids).len(), 2);
    }
}
