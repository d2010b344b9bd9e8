use std::collections::BTreeMap;

use thiserror::Error;

use super::Fraction;
use crate::chain::{Block, NodeId};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("roster is empty")]
    EmptyRoster,
    #[error("transition duration must be at least one tick")]
    TransitionTooShort,
    #[error("turn duration {turn} must exceed transition duration {transition}")]
    TurnTooShort { turn: Tick, transition: Tick },
    #[error("overflow fraction must lie strictly between 0 and 1")]
    BadOverflow,
    #[error("roster lists a node twice")]
    DuplicateNode,
}

/// What happens to the rest of the round when a leader finalizes early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EarlyFinalizeMode {
    /// The next turn starts one transition after the finalizing block.
    #[default]
    ShiftedStart,
    /// The next turn keeps its regular slot.
    WaitRegularSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleAdjustment {
    /// Extend `turn` by `extra` ticks; its leader is skipped afterwards.
    Grace { turn: u64, extra: Tick },
    /// Freeze the clock for `length` ticks starting at `at`.
    Pause { at: Tick, length: Tick },
}

/// Roster assignment in force from `from_turn` on.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Epoch {
    from_turn: u64,
    roster: Vec<NodeId>,
    position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnSchedule {
    epochs: Vec<Epoch>,
    turn_duration: Tick,
    transition_duration: Tick,
    overflow: Fraction,
    mode: EarlyFinalizeMode,
    adjustments: Vec<ScheduleAdjustment>,
}

impl TurnSchedule {
    pub fn new(
        roster: Vec<NodeId>,
        turn_duration: Tick,
        transition_duration: Tick,
    ) -> Result<Self, ScheduleError> {
        Self::with_overflow(
            roster,
            turn_duration,
            transition_duration,
            Fraction::new(1, 5),
        )
    }

    pub fn with_overflow(
        roster: Vec<NodeId>,
        turn_duration: Tick,
        transition_duration: Tick,
        overflow: Fraction,
    ) -> Result<Self, ScheduleError> {
        check_roster(&roster)?;
        if transition_duration < 1 {
            return Err(ScheduleError::TransitionTooShort);
        }
        if turn_duration <= transition_duration {
            return Err(ScheduleError::TurnTooShort {
                turn: turn_duration,
                transition: transition_duration,
            });
        }
        if overflow <= Fraction::from_integer(0) || overflow >= Fraction::from_integer(1) {
            return Err(ScheduleError::BadOverflow);
        }
        Ok(TurnSchedule {
            epochs: vec![Epoch {
                from_turn: 0,
                roster,
                position: 0,
            }],
            turn_duration,
            transition_duration,
            overflow,
            mode: EarlyFinalizeMode::default(),
            adjustments: Vec::new(),
        })
    }

    pub fn with_mode(mut self, mode: EarlyFinalizeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> EarlyFinalizeMode {
        self.mode
    }

    pub fn turn_duration(&self) -> Tick {
        self.turn_duration
    }

    pub fn transition_duration(&self) -> Tick {
        self.transition_duration
    }

    pub fn overflow(&self) -> Fraction {
        self.overflow
    }

    /// Length of an undisturbed turn plus its transition.
    pub fn period(&self) -> Tick {
        self.turn_duration + self.transition_duration
    }

    pub fn adjustments(&self) -> &[ScheduleAdjustment] {
        &self.adjustments
    }

    pub fn apply(&mut self, adj: ScheduleAdjustment) {
        self.adjustments.push(adj);
    }

    fn epoch_for(&self, turn: u64) -> &Epoch {
        self.epochs
            .iter()
            .rev()
            .find(|e| e.from_turn <= turn)
            .expect("epoch 0 covers every turn")
    }

    /// Roster in force for `turn`.
    pub fn roster_at(&self, turn: u64) -> &[NodeId] {
        &self.epoch_for(turn).roster
    }

    /// Latest roster.
    pub fn roster(&self) -> &[NodeId] {
        &self.epochs.last().expect("non-empty").roster
    }

    pub fn len(&self) -> usize {
        self.roster().len()
    }

    pub fn is_empty(&self) -> bool {
        self.roster().is_empty()
    }

    /// Roster position leading `turn`.
    pub fn leader_position(&self, turn: u64) -> usize {
        let e = self.epoch_for(turn);
        let n = e.roster.len() as u64;
        ((e.position as u64 + (turn - e.from_turn) % n) % n) as usize
    }

    pub fn leader_of(&self, turn: u64) -> &NodeId {
        let e = self.epoch_for(turn);
        &e.roster[self.leader_position(turn)]
    }

    pub fn position_of(&self, node: &NodeId) -> Option<usize> {
        self.roster().iter().position(|n| n == node)
    }

    /// Replace the roster from `from_turn` on, with `position` leading that turn.
    pub(crate) fn rebase(
        &self,
        from_turn: u64,
        roster: Vec<NodeId>,
        position: usize,
    ) -> Result<Self, ScheduleError> {
        check_roster(&roster)?;
        let mut next = self.clone();
        next.epochs.retain(|e| e.from_turn < from_turn);
        next.epochs.push(Epoch {
            from_turn,
            roster,
            position,
        });
        Ok(next)
    }

    fn grace(&self, turn: u64) -> Tick {
        self.adjustments
            .iter()
            .map(|a| match a {
                ScheduleAdjustment::Grace { turn: t, extra } if *t == turn => *extra,
                _ => 0,
            })
            .sum()
    }

    /// Extend `[from, to)` by every pause that lands inside it, including
    /// pauses that fall into the extension.
    fn stretch(&self, from: Tick, mut to: Tick) -> Tick {
        let mut pauses: Vec<(Tick, Tick)> = self
            .adjustments
            .iter()
            .filter_map(|a| match a {
                ScheduleAdjustment::Pause { at, length } if *at >= from => Some((*at, *length)),
                _ => None,
            })
            .collect();
        pauses.sort_unstable();
        for (at, len) in pauses {
            if at < to {
                to += len;
            }
        }
        to
    }

    /// Slot of `turn` given the slot before it and known turn terminations.
    pub fn slot_after(
        &self,
        prev: Option<&TurnSlot>,
        terminations: &BTreeMap<u64, Tick>,
    ) -> TurnSlot {
        let (turn, start) = match prev {
            None => (0, 0),
            Some(p) => (p.turn + 1, p.next_start),
        };
        let nominal_end = self.stretch(start, start + self.turn_duration + self.grace(turn));
        let end = match terminations.get(&turn) {
            Some(&at) if at >= start && at < nominal_end => at,
            _ => nominal_end,
        };
        let next_start = match self.mode {
            EarlyFinalizeMode::ShiftedStart => self.stretch(end, end + self.transition_duration),
            EarlyFinalizeMode::WaitRegularSlot => {
                self.stretch(nominal_end, nominal_end + self.transition_duration)
            }
        };
        TurnSlot {
            turn,
            leader: self.leader_of(turn).clone(),
            start,
            nominal_end,
            end,
            next_start,
        }
    }
}

fn check_roster(roster: &[NodeId]) -> Result<(), ScheduleError> {
    if roster.is_empty() {
        return Err(ScheduleError::EmptyRoster);
    }
    let mut keys: Vec<_> = roster.iter().map(|n| n.public_key).collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.len() != roster.len() {
        return Err(ScheduleError::DuplicateNode);
    }
    Ok(())
}

/// One turn: writing window `[start, end)` then transition `[end, next_start)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnSlot {
    pub turn: u64,
    pub leader: NodeId,
    pub start: Tick,
    /// End of the slot absent an early termination.
    pub nominal_end: Tick,
    pub end: Tick,
    pub next_start: Tick,
}

impl TurnSlot {
    pub fn terminated_early(&self) -> bool {
        self.end < self.nominal_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeaderState {
    Leader {
        node: NodeId,
        turn: u64,
        turn_end: Tick,
    },
    Transition {
        prev: NodeId,
        next: NodeId,
        until: Tick,
    },
}

impl LeaderState {
    pub fn leader(&self) -> Option<&NodeId> {
        match self {
            LeaderState::Leader { node, .. } => Some(node),
            LeaderState::Transition { .. } => None,
        }
    }
}

/// Turn endings recorded by transition blocks whose author led that turn.
pub fn terminations_from<'a>(
    schedule: &TurnSchedule,
    blocks: impl IntoIterator<Item = &'a Block>,
) -> BTreeMap<u64, Tick> {
    let mut out = BTreeMap::new();
    for b in blocks {
        if b.kind.is_transition() && *schedule.leader_of(b.turn_index) == b.author {
            let e = out.entry(b.turn_index).or_insert(b.logical_time);
            *e = (*e).min(b.logical_time);
        }
    }
    out
}

/// Lazily extended sequence of turn slots.
#[derive(Debug, Clone)]
pub struct Timeline {
    schedule: TurnSchedule,
    terminations: BTreeMap<u64, Tick>,
    slots: Vec<TurnSlot>,
}

impl Timeline {
    pub fn new(schedule: TurnSchedule, terminations: BTreeMap<u64, Tick>) -> Self {
        Timeline {
            schedule,
            terminations,
            slots: Vec::new(),
        }
    }

    pub fn schedule(&self) -> &TurnSchedule {
        &self.schedule
    }

    pub fn terminations(&self) -> &BTreeMap<u64, Tick> {
        &self.terminations
    }

    /// Record that `turn` ended at `at`. Returns whether anything changed.
    pub fn terminate(&mut self, turn: u64, at: Tick) -> bool {
        if self.terminations.get(&turn).is_some_and(|&t| t <= at) {
            return false;
        }
        self.terminations.insert(turn, at);
        self.slots.truncate(turn as usize);
        true
    }

    pub fn set_schedule(&mut self, schedule: TurnSchedule) {
        self.schedule = schedule;
        self.slots.clear();
    }

    pub fn apply(&mut self, adj: ScheduleAdjustment) {
        self.schedule.apply(adj);
        self.slots.clear();
    }

    pub fn slot(&mut self, turn: u64) -> &TurnSlot {
        while self.slots.len() as u64 <= turn {
            let next = self
                .schedule
                .slot_after(self.slots.last(), &self.terminations);
            self.slots.push(next);
        }
        &self.slots[turn as usize]
    }

    /// Slot whose turn or following transition contains `now`.
    pub fn slot_at(&mut self, now: Tick) -> &TurnSlot {
        if self.slots.last().is_some_and(|s| s.next_start <= now) || self.slots.is_empty() {
            loop {
                let next = self
                    .schedule
                    .slot_after(self.slots.last(), &self.terminations);
                let done = next.next_start > now;
                self.slots.push(next);
                if done {
                    break;
                }
            }
        }
        let idx = self.slots.partition_point(|s| s.next_start <= now);
        &self.slots[idx]
    }

    pub fn leader_state(&mut self, now: Tick) -> LeaderState {
        let slot = self.slot_at(now).clone();
        if now < slot.end {
            LeaderState::Leader {
                node: slot.leader,
                turn: slot.turn,
                turn_end: slot.end,
            }
        } else {
            let next = self.schedule.leader_of(slot.turn + 1).clone();
            LeaderState::Transition {
                prev: slot.leader,
                next,
                until: slot.next_start,
            }
        }
    }
}

/// Who may write at `now`, replaying turn endings from `log`.
pub fn current_leader<'a>(
    now: Tick,
    schedule: &TurnSchedule,
    log: impl IntoIterator<Item = &'a Block>,
) -> LeaderState {
    let terms = terminations_from(schedule, log);
    Timeline::new(schedule.clone(), terms).leader_state(now)
}

/// Signed distance of roster position `pos` from the leader at `leader_pos`:
/// negative counts turns until `pos` leads, positive counts turns since it
/// led, up to the overflow window.
pub fn turn_index(pos: usize, leader_pos: usize, n: usize, overflow: Fraction) -> i64 {
    let raw = (pos + n - leader_pos % n) % n;
    if raw == 0 {
        return 0;
    }
    let window = (overflow * Fraction::from_integer(n as u64)).to_integer() as usize;
    let since = n - raw;
    if since <= window {
        since as i64
    } else {
        -(raw as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster(n: usize) -> Vec<NodeId> {
        (0..n)
            .map(|i| NodeId::new(format!("n{i}"), [i as u8 + 1; 32]))
            .collect()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            TurnSchedule::new(vec![], 10, 5),
            Err(ScheduleError::EmptyRoster)
        );
        assert_eq!(
            TurnSchedule::new(roster(2), 10, 0),
            Err(ScheduleError::TransitionTooShort)
        );
        assert!(matches!(
            TurnSchedule::new(roster(2), 5, 5),
            Err(ScheduleError::TurnTooShort { .. })
        ));
        assert_eq!(
            TurnSchedule::with_overflow(roster(2), 10, 5, Fraction::from_integer(1)),
            Err(ScheduleError::BadOverflow)
        );
        let mut dup = roster(2);
        dup.push(dup[0].clone());
        assert_eq!(
            TurnSchedule::new(dup, 10, 5),
            Err(ScheduleError::DuplicateNode)
        );
    }

    #[test]
    fn stiff_slots() {
        let s = TurnSchedule::new(roster(3), 60, 5).unwrap();
        let mut tl = Timeline::new(s, BTreeMap::new());
        let slot = tl.slot(4).clone();
        assert_eq!((slot.start, slot.end, slot.next_start), (260, 320, 325));
        assert_eq!(slot.leader, roster(3)[1]);
        assert_eq!(tl.slot_at(324).turn, 4);
        assert_eq!(tl.slot_at(325).turn, 5);
    }

    #[test]
    fn pause_inside_turn_stretches_it() {
        let mut s = TurnSchedule::new(roster(3), 60, 5).unwrap();
        s.apply(ScheduleAdjustment::Pause {
            at: 30,
            length: 100,
        });
        let slot = s.slot_after(None, &BTreeMap::new());
        assert_eq!((slot.end, slot.next_start), (160, 165));
    }

    #[test]
    fn turn_index_window() {
        let o = Fraction::new(1, 5);
        assert_eq!(turn_index(3, 3, 50, o), 0);
        assert_eq!(turn_index(4, 3, 50, o), -1);
        assert_eq!(turn_index(2, 3, 50, o), 1);
        assert_eq!(turn_index(43, 3, 50, o), 10);
        assert_eq!(turn_index(42, 3, 50, o), -39);
        let all: Vec<i64> = (0..50).map(|p| turn_index(p, 0, 50, o)).collect();
        assert_eq!(*all.iter().min().unwrap(), -39);
        assert_eq!(*all.iter().max().unwrap(), 10);
        assert_eq!(all.iter().filter(|&&x| x == 0).count(), 1);
    }
}
