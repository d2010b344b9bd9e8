//! Hidden follow-up moves: a fleet sent at round `s` towards a target
//! `d` rounds away may be called back once at a hidden round `c` with
//! `s < c < s + d`. It then returns to its origin at round `2c - s`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::commit::Commitment;
use crate::chain::Hash32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FleetMove {
    pub send_round: u64,
    pub distance: u64,
}

impl FleetMove {
    pub fn arrival(&self) -> u64 {
        self.send_round + self.distance
    }

    pub fn return_round(&self, callback: u64) -> u64 {
        2 * callback - self.send_round
    }

    /// Rounds at which a callback can still happen before arrival.
    pub fn callback_range(&self) -> Option<(u64, u64)> {
        (self.distance >= 2).then(|| (self.send_round + 1, self.arrival() - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowUp {
    pub base: Hash32,
    pub delta: Commitment,
    pub fleet: FleetMove,
    /// Owner-private callback round; hidden until the delta is revealed.
    pub callback: u64,
    pub return_to_origin: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FollowUpError {
    #[error("base {0} already has a follow-up")]
    SecondFollowUp(Hash32),
    #[error("callback round {callback} outside the open range {low}..={high}")]
    CallbackOutOfRange { callback: u64, low: u64, high: u64 },
    #[error("a callback must return the fleet to its origin")]
    MustReturn,
}

/// What a timeout forces into the open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub base: Hash32,
    pub publish_base: bool,
    /// Inclusive callback rounds consistent with the published statement.
    pub callback_window: (u64, u64),
    /// Inclusive bounds on the return round, derived from the callback window.
    pub return_window: (u64, u64),
    /// Only one callback slot is left, so the follow-up is known.
    pub revealed_by_implication: bool,
    /// The timeout falls before the fleet is home; the delta goes public too.
    pub publish_delta: bool,
}

impl Obligation {
    pub fn callback_slots(&self) -> u64 {
        self.callback_window.1 - self.callback_window.0 + 1
    }
}

#[derive(Debug, Clone, Default)]
pub struct FollowUpBook {
    entries: BTreeMap<Hash32, FollowUp>,
}

impl FollowUpBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, base: &Hash32) -> Option<&FollowUp> {
        self.entries.get(base)
    }

    pub fn follow_up(&mut self, f: FollowUp) -> Result<&FollowUp, FollowUpError> {
        if self.entries.contains_key(&f.base) {
            return Err(FollowUpError::SecondFollowUp(f.base));
        }
        if !f.return_to_origin {
            return Err(FollowUpError::MustReturn);
        }
        let (low, high) = f.fleet.callback_range().unwrap_or((1, 0));
        if f.callback < low || f.callback > high {
            return Err(FollowUpError::CallbackOutOfRange {
                callback: f.callback,
                low,
                high,
            });
        }
        let base = f.base;
        Ok(self.entries.entry(base).or_insert(f))
    }
}

/// Timeout `timeout` (a round) hits a hidden send that carries a follow-up.
/// The published statement narrows the callback to rounds no later than
/// both the timeout and the last round before arrival.
pub fn enforce_timeout(f: &FollowUp, timeout: u64) -> Obligation {
    let low = f.fleet.send_round + 1;
    let high = timeout.min(f.fleet.arrival() - 1).max(low);
    Obligation {
        base: f.base,
        publish_base: true,
        callback_window: (low, high),
        return_window: (f.fleet.return_round(low), f.fleet.return_round(high)),
        revealed_by_implication: low == high,
        publish_delta: f.delta.due_turn() < f.fleet.return_round(f.callback),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::NodeId;
    use crate::contracts::commit::CommitPayload;

    fn delta(due: u64) -> Commitment {
        Commitment {
            id: Hash32([9; 32]),
            payload: CommitPayload::GameHash {
                digest: Hash32::ZERO,
            },
            owner: NodeId::new("a", [1; 32]),
            created_turn: 0,
            reveal_deadline: due,
            bloat: false,
        }
    }

    #[test]
    fn callback_must_precede_arrival() {
        let mut book = FollowUpBook::new();
        let f = FollowUp {
            base: Hash32([1; 32]),
            delta: delta(10),
            fleet: FleetMove {
                send_round: 3,
                distance: 4,
            },
            callback: 7,
            return_to_origin: true,
        };
        assert_eq!(
            book.follow_up(f),
            Err(FollowUpError::CallbackOutOfRange {
                callback: 7,
                low: 4,
                high: 6
            })
        );
    }
}
