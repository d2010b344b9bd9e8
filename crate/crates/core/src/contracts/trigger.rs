//! Trigger events: ways for a node that is not leading to get something
//! onto the chain out of turn.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::dispute::{Dispute, DisputeReason};
use crate::chain::{Hash32, NodeId, Transaction};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerMechanism {
    /// The claimant signs, the leader relays.
    PipeViaLN,
    /// A fast all-nodes round collects trigger intents.
    TriggerRound,
    /// The leader lends its writing permission and gets it back.
    Detour,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerIntent {
    pub tick: Tick,
    pub node: NodeId,
    pub payload: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerOutcome {
    Relayed {
        tx: Hash32,
        by: NodeId,
    },
    Ordered {
        intents: Vec<TriggerIntent>,
        rounds: usize,
    },
    /// Writing permission holders in order.
    Detoured {
        holders: Vec<NodeId>,
        tx: Hash32,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TriggerError {
    #[error("the leader cannot trigger in its own turn")]
    ClaimantIsLeader,
    #[error("leader {} ignored trigger {tx}", leader.label)]
    IgnoredByLeader {
        leader: NodeId,
        tx: Hash32,
        dispute: Box<Dispute>,
    },
    #[error("trigger round {round} stalled, {} silent", missing.len())]
    RoundStalled { round: usize, missing: Vec<NodeId> },
    #[error("claim is not signed by the claimant")]
    BadClaim,
}

/// Transactions to invalidate when a leader ignored a legitimate trigger.
/// Only the transactions the trigger affects are touched, not the whole turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IgnoredTrigger {
    pub affected: Vec<Hash32>,
}

/// Mechanism A. `relays` is the leader's behaviour.
pub fn pipe_via_leader(
    claim: &Transaction,
    leader: &NodeId,
    relays: bool,
    turn: u64,
) -> Result<TriggerOutcome, TriggerError> {
    if claim.author == *leader {
        return Err(TriggerError::ClaimantIsLeader);
    }
    if claim.check().is_err() {
        return Err(TriggerError::BadClaim);
    }
    if !relays {
        let dispute = Dispute::open(
            leader.clone(),
            DisputeReason::IgnoredTrigger { tx: claim.id },
            turn,
        );
        return Err(TriggerError::IgnoredByLeader {
            leader: leader.clone(),
            tx: claim.id,
            dispute: Box::new(dispute),
        });
    }
    Ok(TriggerOutcome::Relayed {
        tx: claim.id,
        by: leader.clone(),
    })
}

/// Mechanism B. Each round every participant answers with its new
/// intents (`None` = silent until the deadline). Rounds repeat until one
/// brings nothing new. Intents are ordered by (tick, node).
pub fn trigger_round<F>(
    participants: &BTreeSet<NodeId>,
    leader: &NodeId,
    claimant: &NodeId,
    max_rounds: usize,
    mut answer: F,
) -> Result<TriggerOutcome, TriggerError>
where
    F: FnMut(usize, &NodeId, &[TriggerIntent]) -> Option<Vec<TriggerIntent>>,
{
    if claimant == leader {
        return Err(TriggerError::ClaimantIsLeader);
    }
    let mut seen: Vec<TriggerIntent> = Vec::new();
    for round in 0..max_rounds.max(1) {
        let mut answers: BTreeMap<&NodeId, Vec<TriggerIntent>> = BTreeMap::new();
        let mut missing = Vec::new();
        for node in participants {
            match answer(round, node, &seen) {
                Some(v) => {
                    answers.insert(node, v);
                }
                None => missing.push(node.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(TriggerError::RoundStalled { round, missing });
        }
        let before = seen.len();
        for intent in answers.into_values().flatten() {
            if !seen.contains(&intent) {
                seen.push(intent);
            }
        }
        seen.sort_by(|a, b| (a.tick, &a.node).cmp(&(b.tick, &b.node)));
        if seen.len() == before {
            return Ok(TriggerOutcome::Ordered {
                intents: seen,
                rounds: round + 1,
            });
        }
    }
    Err(TriggerError::RoundStalled {
        round: max_rounds,
        missing: Vec::new(),
    })
}

/// Mechanism C.
pub fn detour(claim: &Transaction, leader: &NodeId) -> Result<TriggerOutcome, TriggerError> {
    if claim.author == *leader {
        return Err(TriggerError::ClaimantIsLeader);
    }
    if claim.check().is_err() {
        return Err(TriggerError::BadClaim);
    }
    Ok(TriggerOutcome::Detoured {
        holders: vec![leader.clone(), claim.author.clone(), leader.clone()],
        tx: claim.id,
    })
}

pub fn trigger(
    mechanism: TriggerMechanism,
    claim: &Transaction,
    leader: &NodeId,
    leader_relays: bool,
    turn: u64,
) -> Result<TriggerOutcome, TriggerError> {
    match mechanism {
        TriggerMechanism::PipeViaLN => pipe_via_leader(claim, leader, leader_relays, turn),
        TriggerMechanism::Detour => detour(claim, leader),
        TriggerMechanism::TriggerRound => {
            let only: BTreeSet<NodeId> = [claim.author.clone()].into_iter().collect();
            let intent = TriggerIntent {
                tick: turn,
                node: claim.author.clone(),
                payload: claim.id,
            };
            trigger_round(&only, leader, &claim.author, 8, |_, _, _| {
                Some(vec![intent.clone()])
            })
        }
    }
}
