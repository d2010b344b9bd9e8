use std::collections::BTreeSet;

use thiserror::Error;

use super::vote::Outcome;
use crate::chain::{Block, BlockKind, Hash32, NodeId, NodeKey};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForkError {
    #[error("no branches given")]
    NoBranches,
    #[error("branch {0} is empty")]
    EmptyBranch(usize),
    #[error("branches do not share a common ancestor")]
    NoCommonAncestor,
    #[error("vote selected branch {0}, which does not exist")]
    UnknownChoice(usize),
}

/// A chain suffix hanging off a common ancestor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub blocks: Vec<Block>,
}

impl Branch {
    pub fn new(blocks: Vec<Block>) -> Self {
        Branch { blocks }
    }

    /// Distinct `(author, turn)` pairs; extra blocks inside a turn add nothing.
    pub fn turns_represented(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| (&b.author, b.turn_index))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Hash of the ancestor this branch grows from.
    pub fn anchor(&self) -> Option<Hash32> {
        self.blocks.first().map(|b| b.prev_hash)
    }

    fn first_author(&self) -> Option<&NodeId> {
        self.blocks.first().map(|b| &b.author)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForkPolicy {
    /// The branches hold no mutually exclusive transactions.
    pub mergeable: bool,
    /// A dispute vote and the branch it selects.
    pub vote: Option<(Outcome, usize)>,
    /// Output of a randomization call, used only to break ties.
    pub randomization: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieBreak {
    None,
    Randomization {
        value: u64,
        candidates: Vec<usize>,
    },
    /// The randomization call produced nothing; the branch with the lowest
    /// first author wins.
    LowestAuthor {
        candidates: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    /// Keep `keep` and re-encapsulate the transactions of `merged` onto it.
    Merge {
        keep: usize,
        merged: Vec<usize>,
    },
    VoteChoice {
        branch: usize,
    },
    ContinueMostProgressive {
        branch: usize,
        tie_break: TieBreak,
    },
}

impl Resolution {
    pub fn chosen(&self) -> usize {
        match self {
            Resolution::Merge { keep, .. } => *keep,
            Resolution::VoteChoice { branch } => *branch,
            Resolution::ContinueMostProgressive { branch, .. } => *branch,
        }
    }
}

fn most_progressive(branches: &[Branch], randomization: Option<u64>) -> (usize, TieBreak) {
    let best = branches
        .iter()
        .map(Branch::turns_represented)
        .max()
        .unwrap_or(0);
    let candidates: Vec<usize> = (0..branches.len())
        .filter(|&i| branches[i].turns_represented() == best)
        .collect();
    if candidates.len() == 1 {
        return (candidates[0], TieBreak::None);
    }
    match randomization {
        Some(value) => (
            candidates[(value % candidates.len() as u64) as usize],
            TieBreak::Randomization { value, candidates },
        ),
        None => {
            let pick = *candidates
                .iter()
                .min_by_key(|&&i| {
                    (
                        branches[i].first_author().cloned(),
                        branches[i].blocks[0].hash(),
                    )
                })
                .expect("non-empty");
            (pick, TieBreak::LowestAuthor { candidates })
        }
    }
}

/// Most Progressive Chain Rule with merge and vote escalation.
pub fn resolve_fork(branches: &[Branch], policy: &ForkPolicy) -> Result<Resolution, ForkError> {
    if branches.is_empty() {
        return Err(ForkError::NoBranches);
    }
    if let Some(i) = branches.iter().position(|b| b.blocks.is_empty()) {
        return Err(ForkError::EmptyBranch(i));
    }
    let anchor = branches[0].anchor();
    if branches.iter().any(|b| b.anchor() != anchor) {
        return Err(ForkError::NoCommonAncestor);
    }
    if branches.len() == 1 {
        return Ok(Resolution::ContinueMostProgressive {
            branch: 0,
            tie_break: TieBreak::None,
        });
    }
    if policy.mergeable {
        let (keep, _) = most_progressive(branches, policy.randomization);
        let merged = (0..branches.len()).filter(|&i| i != keep).collect();
        return Ok(Resolution::Merge { keep, merged });
    }
    if let Some((outcome, choice)) = &policy.vote {
        if *choice >= branches.len() {
            return Err(ForkError::UnknownChoice(*choice));
        }
        if outcome.passed {
            return Ok(Resolution::VoteChoice { branch: *choice });
        }
    }
    let (branch, tie_break) = most_progressive(branches, policy.randomization);
    Ok(Resolution::ContinueMostProgressive { branch, tie_break })
}

/// Leader-signed data block carrying the other branches' transactions on top
/// of `tip`, skipping any the kept branch already holds. `None` when nothing
/// is left to merge.
pub fn merge_block(
    leader: &NodeKey,
    tip: &Block,
    kept: &Branch,
    others: &[&Branch],
    turn: u64,
    now: Tick,
) -> Option<Block> {
    let mut seen: BTreeSet<Hash32> = kept
        .blocks
        .iter()
        .flat_map(|b| b.transactions.iter().map(|t| t.id))
        .collect();
    let txs: Vec<_> = others
        .iter()
        .flat_map(|b| b.blocks.iter())
        .flat_map(|b| b.transactions.iter())
        .filter(|t| seen.insert(t.id))
        .cloned()
        .collect();
    if txs.is_empty() {
        return None;
    }
    Some(
        Block::new(
            tip.height + 1,
            tip.hash(),
            leader.id().clone(),
            turn,
            now,
            BlockKind::Data,
            txs,
        )
        .signed(leader),
    )
}
