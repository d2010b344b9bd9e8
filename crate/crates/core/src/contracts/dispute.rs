use thiserror::Error;

use crate::chain::{sha256_parts, Hash32, NodeId};
use crate::consensus::Outcome;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisputeReason {
    RevealMismatch { commitment: Hash32 },
    RevealOverdue { commitment: Hash32 },
    IgnoredTrigger { tx: Hash32 },
    InitiatorSilent { session: Hash32 },
    FogOutOfBand { report: Hash32 },
    InvalidClaim { index: usize },
    WinDenied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispute {
    pub id: Hash32,
    pub accused: NodeId,
    pub reason: DisputeReason,
    pub opened_turn: u64,
}

impl Dispute {
    pub fn open(accused: NodeId, reason: DisputeReason, opened_turn: u64) -> Self {
        let id = sha256_parts(&[
            &accused.public_key,
            format!("{reason:?}").as_bytes(),
            &opened_turn.to_le_bytes(),
        ]);
        Dispute {
            id,
            accused,
            reason,
            opened_turn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelperVerdict {
    Guilty,
    Innocent,
}

/// External arbiter reached through the escalation callback.
pub trait Helper {
    fn judge(&mut self, dispute: &Dispute) -> HelperVerdict;
}

/// Implementation hook that tries to rebuild the disputed state.
pub trait Recovery {
    fn recover(&mut self, dispute: &Dispute) -> Result<(), String>;
}

pub enum DisputeStrategy<'a> {
    Vote(&'a Outcome),
    Escalate(&'a mut dyn Helper),
    StopGame,
    Recover(&'a mut dyn Recovery),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisputeOutcome {
    /// The accusation holds and the accused is blamed.
    Upheld,
    Rejected,
    /// Game ends and nobody involved in the dispute can win it.
    Stopped {
        excluded: Vec<NodeId>,
    },
    Recovered,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DisputeError {
    #[error("recovery impossible: {0}")]
    RecoverImpossible(String),
}

/// `involved` lists every party of the dispute besides the accused.
pub fn resolve_dispute(
    dispute: &Dispute,
    involved: &[NodeId],
    strategy: DisputeStrategy<'_>,
) -> Result<DisputeOutcome, DisputeError> {
    match strategy {
        DisputeStrategy::Vote(outcome) => Ok(if outcome.passed {
            DisputeOutcome::Upheld
        } else {
            DisputeOutcome::Rejected
        }),
        DisputeStrategy::Escalate(helper) => Ok(match helper.judge(dispute) {
            HelperVerdict::Guilty => DisputeOutcome::Upheld,
            HelperVerdict::Innocent => DisputeOutcome::Rejected,
        }),
        DisputeStrategy::StopGame => {
            let mut excluded = vec![dispute.accused.clone()];
            for n in involved {
                if !excluded.contains(n) {
                    excluded.push(n.clone());
                }
            }
            Ok(DisputeOutcome::Stopped { excluded })
        }
        DisputeStrategy::Recover(r) => {
            r.recover(dispute)
                .map_err(DisputeError::RecoverImpossible)?;
            Ok(DisputeOutcome::Recovered)
        }
    }
}
