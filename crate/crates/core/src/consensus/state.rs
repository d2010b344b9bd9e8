use thiserror::Error;

use super::events::EventLog;
use super::schedule::{terminations_from, LeaderState, ScheduleAdjustment, Timeline, TurnSchedule};
use crate::chain::sha256;
use crate::chain::{Block, BlockKind, Chain, ChainError, Hash32, NodeId, NodeKey, Transaction};
use crate::codec::Encoder;
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("{0} does not hold the turn")]
    NotLeader(String),
    #[error("writing permission of turn {turn} has expired")]
    TurnExpired { turn: u64 },
    #[error("{0} is not the scheduled successor")]
    WrongSuccessor(String),
    #[error("successor signature missing")]
    MissingCounterSignature,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Single-owner consensus state: schedule, canonical chain and event log.
/// Every mutation goes through one method call, so replaying the same calls
/// reproduces the same [`PotState::digest`].
#[derive(Debug, Clone)]
pub struct PotState {
    timeline: Timeline,
    chain: Chain,
    events: EventLog,
}

impl PotState {
    pub fn new(schedule: TurnSchedule, chain: Chain) -> Self {
        let terms = terminations_from(&schedule, chain.blocks());
        PotState {
            timeline: Timeline::new(schedule, terms),
            chain,
            events: EventLog::new(),
        }
    }

    pub fn schedule(&self) -> &TurnSchedule {
        self.timeline.schedule()
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn chain_mut(&mut self) -> &mut Chain {
        &mut self.chain
    }

    pub fn timeline(&mut self) -> &mut Timeline {
        &mut self.timeline
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn log_event(&mut self, tick: Tick, node: &str, kind: &str, block: Option<Hash32>) {
        self.events.push(tick, node, kind, block);
    }

    pub fn current_leader(&mut self, now: Tick) -> LeaderState {
        self.timeline.leader_state(now)
    }

    pub fn apply_adjustment(&mut self, adj: ScheduleAdjustment, now: Tick) {
        self.timeline.apply(adj);
        let kind = match adj {
            ScheduleAdjustment::Grace { .. } => "grace",
            ScheduleAdjustment::Pause { .. } => "pause",
        };
        self.events.push(now, "network", kind, None);
    }

    pub fn set_schedule(&mut self, schedule: TurnSchedule, now: Tick) {
        self.timeline.set_schedule(schedule);
        self.events.push(now, "network", "roster", None);
    }

    /// Turn `node` leads at `now`, or why it may not write.
    fn writing_turn(&mut self, node: &NodeId, now: Tick) -> Result<(u64, Tick), ConsensusError> {
        match self.timeline.leader_state(now) {
            LeaderState::Leader {
                node: l,
                turn,
                turn_end,
            } if l == *node => Ok((turn, turn_end)),
            LeaderState::Transition { prev, .. } if prev == *node => {
                Err(ConsensusError::TurnExpired {
                    turn: self.timeline.slot_at(now).turn,
                })
            }
            _ => Err(ConsensusError::NotLeader(node.label.clone())),
        }
    }

    fn next_block(
        &self,
        author: &NodeId,
        turn: u64,
        now: Tick,
        kind: BlockKind,
        txs: Vec<Transaction>,
    ) -> Block {
        Block::new(
            self.chain.height() + 1,
            self.chain.tip_hash(),
            author.clone(),
            turn,
            now,
            kind,
            txs,
        )
    }

    /// Author a data block. Writing stops one transition before the turn ends.
    pub fn propose_block(
        &mut self,
        node: &NodeKey,
        txs: Vec<Transaction>,
        now: Tick,
    ) -> Result<Block, ConsensusError> {
        let (turn, turn_end) = self.writing_turn(node.id(), now)?;
        if now + self.schedule().transition_duration() >= turn_end {
            return Err(ConsensusError::TurnExpired { turn });
        }
        let block = self
            .next_block(node.id(), turn, now, BlockKind::Data, txs)
            .signed(node);
        self.chain.append_block(block.clone())?;
        self.events
            .push(now, &node.id().label, "data", Some(block.hash()));
        Ok(block)
    }

    /// Seal the turn with a block signed by the leader and its successor.
    pub fn handover(
        &mut self,
        leader: &NodeKey,
        successor: &NodeId,
        countersign: Option<&NodeKey>,
        now: Tick,
    ) -> Result<Block, ConsensusError> {
        let (turn, _) = self.writing_turn(leader.id(), now)?;
        if self.schedule().leader_of(turn + 1) != successor {
            return Err(ConsensusError::WrongSuccessor(successor.label.clone()));
        }
        let co = countersign
            .filter(|k| k.id() == successor)
            .ok_or(ConsensusError::MissingCounterSignature)?;
        let block = self
            .next_block(leader.id(), turn, now, BlockKind::Handover, Vec::new())
            .signed(leader)
            .signed(co);
        self.seal(block, now, "handover")
    }

    /// End the turn early.
    pub fn finalize_turn(&mut self, leader: &NodeKey, now: Tick) -> Result<Block, ConsensusError> {
        let (turn, _) = self.writing_turn(leader.id(), now)?;
        let block = self
            .next_block(leader.id(), turn, now, BlockKind::Finalizing, Vec::new())
            .signed(leader);
        self.seal(block, now, "finalize")
    }

    fn seal(&mut self, block: Block, now: Tick, kind: &str) -> Result<Block, ConsensusError> {
        self.chain.append_block(block.clone())?;
        self.timeline
            .terminate(block.turn_index, block.logical_time);
        self.events
            .push(now, &block.author.label, kind, Some(block.hash()));
        Ok(block)
    }

    /// Digest over the chain tip, invalidation set, schedule adjustments and
    /// event log.
    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.raw(&self.chain.tip_hash().0).u64(self.chain.fixed_upto());
        e.u64(self.chain.invalidated().len() as u64);
        for id in self.chain.invalidated() {
            e.raw(&id.0);
        }
        for adj in self.schedule().adjustments() {
            match adj {
                ScheduleAdjustment::Grace { turn, extra } => e.u8(0).u64(*turn).u64(*extra),
                ScheduleAdjustment::Pause { at, length } => e.u8(1).u64(*at).u64(*length),
            };
        }
        e.raw(&self.events.digest().0);
        sha256(&e.finish())
    }
}
