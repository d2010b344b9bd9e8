use std::collections::BTreeSet;

use thiserror::Error;

use super::schedule::{ScheduleError, TurnSchedule};
use super::vote::Outcome;
use crate::chain::{Hash32, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MembershipError {
    #[error("index {index} would replace the leader or become its successor")]
    BadInsertIndex { index: usize },
    #[error("leaver has {} undisclosed obligation(s)", missing.len())]
    UndisclosedObligations { missing: Vec<Hash32> },
    #[error("{0} disclosed its keys when leaving and may not rejoin")]
    RejoinForbidden(String),
    #[error("admission was not granted")]
    NotAdmitted,
    #[error("kick vote did not pass")]
    VoteFailed,
    #[error("{0} is already a member")]
    AlreadyMember(String),
    #[error("{0} is not a member")]
    UnknownNode(String),
    #[error("the last node cannot leave")]
    LastNode,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinProposal {
    pub candidate: NodeId,
    /// Roster index the candidate takes; later nodes shift by one.
    pub insert_at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaveNotice {
    pub node: NodeId,
    /// Ids of the commitments and secrets the leaver published.
    pub disclosed: BTreeSet<Hash32>,
}

pub enum Admission<'a> {
    Vote(&'a Outcome),
    TrustedEntity,
}

/// Roster changes. Changes take effect from the turn after `current_turn`,
/// so the sitting leader and its successor keep their slots.
#[derive(Debug, Clone)]
pub struct Membership {
    schedule: TurnSchedule,
    departed: BTreeSet<NodeId>,
}

impl Membership {
    pub fn new(schedule: TurnSchedule) -> Self {
        Membership {
            schedule,
            departed: BTreeSet::new(),
        }
    }

    pub fn schedule(&self) -> &TurnSchedule {
        &self.schedule
    }

    /// Leavers whose shared keys are public and who may not rejoin.
    pub fn departed(&self) -> &BTreeSet<NodeId> {
        &self.departed
    }

    /// Rebase from `current_turn + 1`, keeping whoever was due to lead it.
    fn rebase(
        &mut self,
        current_turn: u64,
        roster: Vec<NodeId>,
        removed: Option<&NodeId>,
    ) -> Result<(), MembershipError> {
        let next = current_turn + 1;
        let old_roster = self.schedule.roster_at(next).to_vec();
        let n = old_roster.len();
        let start = self.schedule.leader_position(next);
        let due = (0..n)
            .map(|k| &old_roster[(start + k) % n])
            .find(|id| Some(*id) != removed)
            .expect("at least one node remains");
        let position = roster
            .iter()
            .position(|id| id == due)
            .expect("due leader is still listed");
        self.schedule = self.schedule.rebase(next, roster, position)?;
        Ok(())
    }

    pub fn join_node(
        &mut self,
        proposal: &JoinProposal,
        admission: Admission<'_>,
        current_turn: u64,
    ) -> Result<&TurnSchedule, MembershipError> {
        let cand = &proposal.candidate;
        if self.departed.contains(cand) {
            return Err(MembershipError::RejoinForbidden(cand.label.clone()));
        }
        if self.schedule.roster().contains(cand) {
            return Err(MembershipError::AlreadyMember(cand.label.clone()));
        }
        match admission {
            Admission::TrustedEntity => {}
            Admission::Vote(o) if o.passed => {}
            Admission::Vote(_) => return Err(MembershipError::NotAdmitted),
        }
        let roster = self.schedule.roster().to_vec();
        let n = roster.len();
        let leader = self.schedule.leader_position(current_turn);
        let index = proposal.insert_at;
        // Inserting at the leader's index would take its place; inserting
        // right after it, or at 0 when it sits last, makes the candidate its
        // successor.
        if index > n || index == leader || index == leader + 1 || (leader + 1 == n && index == 0) {
            return Err(MembershipError::BadInsertIndex { index });
        }
        let mut next = roster;
        next.insert(index, cand.clone());
        self.rebase(current_turn, next, None)?;
        Ok(&self.schedule)
    }

    pub fn leave_node(
        &mut self,
        notice: &LeaveNotice,
        obligations: &BTreeSet<Hash32>,
        current_turn: u64,
    ) -> Result<&TurnSchedule, MembershipError> {
        let missing: Vec<Hash32> = obligations.difference(&notice.disclosed).copied().collect();
        if !missing.is_empty() {
            return Err(MembershipError::UndisclosedObligations { missing });
        }
        self.remove(&notice.node, current_turn)?;
        if !notice.disclosed.is_empty() {
            self.departed.insert(notice.node.clone());
        }
        Ok(&self.schedule)
    }

    pub fn kick_node(
        &mut self,
        node: &NodeId,
        vote: &Outcome,
        current_turn: u64,
    ) -> Result<&TurnSchedule, MembershipError> {
        if !vote.passed {
            return Err(MembershipError::VoteFailed);
        }
        self.remove(node, current_turn)?;
        Ok(&self.schedule)
    }

    fn remove(&mut self, node: &NodeId, current_turn: u64) -> Result<(), MembershipError> {
        let mut roster = self.schedule.roster().to_vec();
        let idx = roster
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| MembershipError::UnknownNode(node.label.clone()))?;
        if roster.len() == 1 {
            return Err(MembershipError::LastNode);
        }
        roster.remove(idx);
        self.rebase(current_turn, roster, Some(node))
    }
}
