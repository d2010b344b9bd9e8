use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::Fraction;
use crate::chain::{Hash32, NodeId};
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoteQuestion {
    InvalidateTx(Hash32),
    InvalidateBlockTxs(Vec<Hash32>),
    KickNode(NodeId),
    Pause { at: Tick, length: Tick },
    AcceptPrune,
    AdmitNode(NodeId),
    ForkChoice(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ballot {
    Yes,
    No,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoteError {
    #[error("{0} already voted")]
    DoubleBallot(String),
    #[error("vote closed at tick {0}")]
    VoteClosed(Tick),
    #[error("tally before deadline {deadline} with {missing} active node(s) still silent")]
    TallyEarly { deadline: Tick, missing: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    pub yes: usize,
    pub no: usize,
    /// Active nodes that did not vote; they count as consent.
    pub silent: usize,
    pub active: usize,
    pub yes_fraction: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteState {
    pub call: Hash32,
    pub question: VoteQuestion,
    pub opened_at: Tick,
    pub deadline: Tick,
    pub threshold: Fraction,
    ballots: BTreeMap<NodeId, Ballot>,
}

pub fn open_vote(
    call: Hash32,
    question: VoteQuestion,
    now: Tick,
    deadline: Tick,
    threshold: Fraction,
) -> VoteState {
    VoteState {
        call,
        question,
        opened_at: now,
        deadline,
        threshold,
        ballots: BTreeMap::new(),
    }
}

impl VoteState {
    pub fn ballots(&self) -> &BTreeMap<NodeId, Ballot> {
        &self.ballots
    }

    pub fn cast_ballot(
        &mut self,
        voter: &NodeId,
        ballot: Ballot,
        now: Tick,
    ) -> Result<(), VoteError> {
        if now > self.deadline {
            return Err(VoteError::VoteClosed(self.deadline));
        }
        if self.ballots.contains_key(voter) {
            return Err(VoteError::DoubleBallot(voter.label.clone()));
        }
        self.ballots.insert(voter.clone(), ballot);
        Ok(())
    }

    /// Count the vote. Allowed at or after the deadline, or earlier once
    /// every active node has voted (no silence is left to infer).
    pub fn tally(&self, active: &BTreeSet<NodeId>, now: Tick) -> Result<Outcome, VoteError> {
        let missing = active
            .iter()
            .filter(|n| !self.ballots.contains_key(*n))
            .count();
        if now < self.deadline && missing > 0 {
            return Err(VoteError::TallyEarly {
                deadline: self.deadline,
                missing,
            });
        }
        let count = |b: Ballot| {
            active
                .iter()
                .filter(|n| self.ballots.get(*n) == Some(&b))
                .count()
        };
        let (yes, no) = (count(Ballot::Yes), count(Ballot::No));
        let n = active.len() as u64;
        let yes_fraction = if n == 0 {
            Fraction::from_integer(0)
        } else {
            Fraction::new((yes + missing) as u64, n)
        };
        Ok(Outcome {
            passed: n > 0 && yes_fraction >= self.threshold,
            yes,
            no,
            silent: missing,
            active: active.len(),
            yes_fraction,
        })
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
    fn silence_counts_as_consent() {
        let ids = ids(10);
        let mut v = open_vote(
            Hash32::ZERO,
            VoteQuestion::AcceptPrune,
            0,
            100,
            Fraction::new(1, 2),
        );
        for id in &ids[..3] {
            v.cast_ballot(id, Ballot::No, 1).unwrap();
        }
        for id in &ids[3..5] {
            v.cast_ballot(id, Ballot::Yes, 1).unwrap();
        }
        let active: BTreeSet<_> = ids.iter().cloned().collect();
        assert!(matches!(
            v.tally(&active, 50),
            Err(VoteError::TallyEarly { missing: 5, .. })
        ));
        let o = v.tally(&active, 100).unwrap();
        assert_eq!((o.yes, o.no, o.silent), (2, 3, 5));
        assert_eq!(o.yes_fraction, Fraction::new(7, 10));
        assert!(o.passed);
    }

    #[test]
    fn ballots_close_and_do_not_repeat() {
        let ids = ids(2);
        let mut v = open_vote(
            Hash32::ZERO,
            VoteQuestion::AcceptPrune,
            0,
            10,
            Fraction::new(1, 2),
        );
        v.cast_ballot(&ids[0], Ballot::No, 0).unwrap();
        assert_eq!(
            v.cast_ballot(&ids[0], Ballot::Yes, 1),
            Err(VoteError::DoubleBallot("n0".into()))
        );
        assert_eq!(
            v.cast_ballot(&ids[1], Ballot::No, 11),
            Err(VoteError::VoteClosed(10))
        );
        v.cast_ballot(&ids[1], Ballot::No, 2).unwrap();
        let active: BTreeSet<_> = ids.iter().cloned().collect();
        let o = v.tally(&active, 3).unwrap();
        assert!(!o.passed);
    }
}
