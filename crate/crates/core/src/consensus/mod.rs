//! The turn state machine: leadership, handover, finality, votes, forks and
//! roster changes.

mod adaptive;
mod events;
mod finality;
mod fork;
mod membership;
mod schedule;
mod state;
mod vote;

pub use adaptive::{AdaptError, AdaptEvent, AdaptivePolicy, AdaptiveState};
pub use events::{EventLog, EventRecord};
pub use finality::{ActivityTracker, FinalityError, FinalityStatus, FinalityTracker, TrackedBlock};
pub use fork::{merge_block, resolve_fork, Branch, ForkError, ForkPolicy, Resolution, TieBreak};
pub use membership::{Admission, JoinProposal, LeaveNotice, Membership, MembershipError};
pub use schedule::{
    current_leader, terminations_from, turn_index, EarlyFinalizeMode, LeaderState,
    ScheduleAdjustment, ScheduleError, Timeline, TurnSchedule, TurnSlot,
};
pub use state::{ConsensusError, PotState};
pub use vote::{open_vote, Ballot, Outcome, VoteError, VoteQuestion, VoteState};

use num_rational::Ratio;

/// Exact fraction used for thresholds and fractions of the roster.
pub type Fraction = Ratio<u64>;

/// Parse `0.5`, `1/3` or `2` into an exact fraction.
pub fn parse_fraction(s: &str) -> Option<Fraction> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let d: u64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n.trim().parse().ok()?, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let scale = 10u64.pow(frac.len() as u32);
    let frac_v: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    Some(Ratio::new(
        int.checked_mul(scale)?.checked_add(frac_v)?,
        scale,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("0.5"), Some(Ratio::new(1, 2)));
        assert_eq!(parse_fraction("1/3"), Some(Ratio::new(1, 3)));
        assert_eq!(parse_fraction("0.333"), Some(Ratio::new(333, 1000)));
        assert_eq!(parse_fraction("2"), Some(Ratio::from_integer(2)));
        assert_eq!(parse_fraction("1/0"), None);
        assert_eq!(parse_fraction("x"), None);
    }
}
