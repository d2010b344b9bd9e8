use std::collections::VecDeque;

use thiserror::Error;

use super::schedule::ScheduleAdjustment;
use super::vote::Outcome;
use crate::chain::NodeId;
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdaptEvent {
    /// The leader of `turn` stayed silent past its slot.
    LostLeader { turn: u64 },
    /// Scheduled daily break requested by a node.
    NightSwitch {
        requester: NodeId,
        at: Tick,
        length: Tick,
    },
    /// Longer ad-hoc break requested by a node.
    VacationBreak {
        requester: NodeId,
        at: Tick,
        length: Tick,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdaptError {
    #[error("{requester} already paused {count} time(s) in a row")]
    GraceExhausted { requester: String, count: u32 },
    #[error("turn {0} already received its grace period")]
    GraceUsed(u64),
    #[error("pause vote did not pass")]
    VoteFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptivePolicy {
    /// Extra ticks granted to a silent leader before it is skipped.
    pub grace: Tick,
    /// Consecutive pauses a single node may obtain.
    pub max_consecutive_pauses: u32,
}

impl Default for AdaptivePolicy {
    fn default() -> Self {
        AdaptivePolicy {
            grace: 0,
            max_consecutive_pauses: 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdaptiveState {
    policy: AdaptivePolicy,
    graced: VecDeque<u64>,
    pauses: Vec<NodeId>,
}

impl AdaptiveState {
    pub fn new(policy: AdaptivePolicy) -> Self {
        AdaptiveState {
            policy,
            graced: VecDeque::new(),
            pauses: Vec::new(),
        }
    }

    pub fn policy(&self) -> &AdaptivePolicy {
        &self.policy
    }

    fn trailing_pauses(&self, node: &NodeId) -> u32 {
        self.pauses.iter().rev().take_while(|n| *n == node).count() as u32
    }

    /// Turn an observed event into a schedule adjustment. Pauses need a
    /// passed vote; a node can chain at most `max_consecutive_pauses`.
    pub fn adapt_turn_time(
        &mut self,
        event: &AdaptEvent,
        vote: Option<&Outcome>,
    ) -> Result<ScheduleAdjustment, AdaptError> {
        match event {
            AdaptEvent::LostLeader { turn } => {
                if self.graced.contains(turn) {
                    return Err(AdaptError::GraceUsed(*turn));
                }
                self.graced.push_back(*turn);
                if self.graced.len() > 64 {
                    self.graced.pop_front();
                }
                Ok(ScheduleAdjustment::Grace {
                    turn: *turn,
                    extra: self.policy.grace,
                })
            }
            AdaptEvent::NightSwitch {
                requester,
                at,
                length,
            }
            | AdaptEvent::VacationBreak {
                requester,
                at,
                length,
            } => {
                let count = self.trailing_pauses(requester);
                if count >= self.policy.max_consecutive_pauses {
                    return Err(AdaptError::GraceExhausted {
                        requester: requester.label.clone(),
                        count,
                    });
                }
                if !vote.is_some_and(|o| o.passed) {
                    return Err(AdaptError::VoteFailed);
                }
                self.pauses.push(requester.clone());
                Ok(ScheduleAdjustment::Pause {
                    at: *at,
                    length: *length,
                })
            }
        }
    }
}
