use thiserror::Error;

use crate::chain::{Block, Hash32, NodeId};
use crate::consensus::{turn_index, Fraction};
use crate::Tick;

/// What a node does right after leading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PostTurn {
    /// Sleep a quarter round: `p = t * n / 4`.
    #[default]
    DeepSleep,
    /// Keep pulling at the leading rate `f(0)`.
    Active,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PullError {
    #[error("post-turn rate must be positive")]
    NoPull,
    #[error("post-turn interval {interval} exceeds one round of {round} ticks")]
    Disconnects { interval: Fraction, round: Fraction },
    #[error("rates must not decrease towards the turn")]
    NotMonotone,
    #[error("no roster node answered")]
    NetworkLost,
}

/// Piecewise pull-rate function over the turn index `x`.
///
/// * `x < far_bound`: `far_rate`
/// * `far_bound <= x <= mid_bound`: `mid_rate`
/// * `mid_bound < x < 0`: linear from `mid_rate` at `mid_bound + 1` to `lead_rate` at 0
/// * `x >= 0`: `lead_rate`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PullStrategy {
    pub far_rate: Fraction,
    pub mid_rate: Fraction,
    pub lead_rate: Fraction,
    pub far_bound: i64,
    pub mid_bound: i64,
    pub post_turn: PostTurn,
}

impl Default for PullStrategy {
    fn default() -> Self {
        PullStrategy {
            far_rate: Fraction::new(1, 2),
            mid_rate: Fraction::from_integer(2),
            lead_rate: Fraction::from_integer(5),
            far_bound: -15,
            mid_bound: -6,
            post_turn: PostTurn::DeepSleep,
        }
    }
}

impl PullStrategy {
    /// Requests per turn slot at index `x`.
    pub fn rate(&self, x: i64) -> Fraction {
        if x < self.far_bound {
            self.far_rate
        } else if x <= self.mid_bound {
            self.mid_rate
        } else if x < 0 {
            let ramp_start = self.mid_bound + 1;
            let steps = Fraction::from_integer((x - ramp_start) as u64);
            let len = Fraction::from_integer((-ramp_start) as u64);
            self.mid_rate + (self.lead_rate - self.mid_rate) * steps / len
        } else {
            self.lead_rate
        }
    }

    /// Ticks between pulls for a node at index `x` in a roster of `n`.
    pub fn interval(&self, x: i64, t: Tick, n: usize) -> Fraction {
        if x > 0 && self.post_turn == PostTurn::DeepSleep {
            return Fraction::new(t * n as u64, 4);
        }
        Fraction::from_integer(t) / self.rate(x)
    }

    /// Reject configurations under which a node stops pulling or sleeps
    /// through its own turn.
    pub fn validate(&self, t: Tick, n: usize) -> Result<(), PullError> {
        let zero = Fraction::from_integer(0);
        if self.lead_rate <= zero || self.far_rate <= zero || self.mid_rate <= zero {
            return Err(PullError::NoPull);
        }
        if self.far_rate > self.mid_rate
            || self.mid_rate > self.lead_rate
            || self.far_bound > self.mid_bound
            || self.mid_bound >= 0
        {
            return Err(PullError::NotMonotone);
        }
        let round = Fraction::from_integer(t * n as u64);
        let post = self.interval(1, t, n);
        if post > round {
            return Err(PullError::Disconnects {
                interval: post,
                round,
            });
        }
        Ok(())
    }

    /// Index of roster position `pos` when `leader` leads.
    pub fn index_of(pos: usize, leader: usize, n: usize, overflow: Fraction) -> i64 {
        turn_index(pos, leader, n, overflow)
    }
}

/// `p = t / f(x)` under the default anchors.
pub fn pull_interval(x: i64, t: Tick) -> Fraction {
    Fraction::from_integer(t) / PullStrategy::default().rate(x)
}

/// The turn at `tick` was led by roster position `leader_pos`; learned from
/// transition block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionMark {
    pub leader_pos: usize,
    pub tick: Tick,
    pub block: Hash32,
}

/// Assume stiff turns since the last known transition.
pub fn guess_leader(
    leader_pos: usize,
    last_transition_tick: Tick,
    n: usize,
    period: Tick,
    now: Tick,
) -> usize {
    let steps = now.saturating_sub(last_transition_tick) / period.max(1);
    ((leader_pos as u64 + steps % n as u64) % n as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateRequest {
    pub requester: NodeId,
    pub last_known_transition: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateResponse {
    /// Blocks starting with the requester's transition block.
    Suffix(Vec<Block>),
    Referral(NodeId),
    NoAnswer,
}

/// Answer a pull request from a local block list.
pub fn serve_update(blocks: &[Block], req: &UpdateRequest) -> UpdateResponse {
    match blocks
        .iter()
        .position(|b| b.hash() == req.last_known_transition)
    {
        Some(i) => UpdateResponse::Suffix(blocks[i..].to_vec()),
        None => UpdateResponse::NoAnswer,
    }
}

pub trait UpdateSource {
    fn request(&mut self, target: &NodeId, req: &UpdateRequest) -> UpdateResponse;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateResult {
    /// The node believes it leads and holds the newest data.
    Skipped,
    Updated {
        from: NodeId,
        probes: usize,
        blocks: Vec<Block>,
        recalibrated: bool,
    },
}

/// A pulling node's view of the network.
#[derive(Debug, Clone)]
pub struct PullNode {
    pub id: NodeId,
    pub roster: Vec<NodeId>,
    pub turn: Tick,
    pub transition: Tick,
    pub mark: TransitionMark,
}

impl PullNode {
    pub fn position(&self) -> usize {
        self.roster
            .iter()
            .position(|n| *n == self.id)
            .expect("node is on its roster")
    }

    pub fn guess(&self, now: Tick) -> usize {
        guess_leader(
            self.mark.leader_pos,
            self.mark.tick,
            self.roster.len(),
            self.turn + self.transition,
            now,
        )
    }

    /// Take the newest transition block in `blocks` as the new reference.
    pub fn recalibrate(&mut self, blocks: &[Block]) -> bool {
        let Some(b) = blocks.iter().rev().find(|b| b.kind.is_transition()) else {
            return false;
        };
        let Some(pos) = self.roster.iter().position(|n| *n == b.author) else {
            return false;
        };
        let next = TransitionMark {
            leader_pos: (pos + 1) % self.roster.len(),
            tick: b.logical_time + self.transition,
            block: b.hash(),
        };
        let changed = next != self.mark;
        self.mark = next;
        changed
    }
}

/// Probe order: the guess, then alternately predecessor and successor
/// positions moving outwards, skipping `own`.
fn probe_order(guess: usize, own: usize, n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let mut push = |p: usize| {
        if p != own && !order.contains(&p) {
            order.push(p);
        }
    };
    push(guess);
    for d in 1..n {
        push((guess + n - d % n) % n);
        push((guess + d) % n);
    }
    order
}

/// One pull: ask the guessed leader, widen the search on silence, follow
/// referrals, and recalibrate from the newest transition block received.
pub fn pull_once<S: UpdateSource>(
    node: &mut PullNode,
    now: Tick,
    network: &mut S,
) -> Result<UpdateResult, PullError> {
    let n = node.roster.len();
    let own = node.position();
    let guess = node.guess(now);
    if guess == own {
        return Ok(UpdateResult::Skipped);
    }
    let req = UpdateRequest {
        requester: node.id.clone(),
        last_known_transition: node.mark.block,
    };
    let mut queue = probe_order(guess, own, n);
    let mut asked: Vec<usize> = Vec::new();
    let mut probes = 0;
    while let Some(target) = queue.first().copied() {
        queue.remove(0);
        if asked.contains(&target) {
            continue;
        }
        asked.push(target);
        probes += 1;
        let peer = node.roster[target].clone();
        match network.request(&peer, &req) {
            UpdateResponse::Suffix(blocks)
                if blocks
                    .first()
                    .is_some_and(|b| b.hash() == req.last_known_transition) =>
            {
                let recalibrated = node.recalibrate(&blocks);
                return Ok(UpdateResult::Updated {
                    from: peer,
                    probes,
                    blocks,
                    recalibrated,
                });
            }
            UpdateResponse::Referral(to) => {
                if let Some(p) = node.roster.iter().position(|n| *n == to) {
                    if p != own && !asked.contains(&p) {
                        queue.insert(0, p);
                    }
                }
            }
            _ => {}
        }
    }
    Err(PullError::NetworkLost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        assert_eq!(pull_interval(-9, 60), Fraction::from_integer(30));
        assert_eq!(pull_interval(-25, 60), Fraction::from_integer(120));
        assert_eq!(pull_interval(0, 60), Fraction::from_integer(12));
        let s = PullStrategy::default();
        assert_eq!(s.rate(-15), Fraction::from_integer(2));
        assert_eq!(s.rate(-16), Fraction::new(1, 2));
        assert_eq!(s.rate(-5), Fraction::from_integer(2));
        assert_eq!(s.rate(-1), Fraction::new(22, 5));
        assert_eq!(s.interval(3, 60, 50), Fraction::from_integer(750));
    }

    #[test]
    fn rate_is_monotone() {
        let s = PullStrategy::default();
        for x in -15..0 {
            assert!(s.rate(x) <= s.rate(x + 1));
        }
    }

    #[test]
    fn validation() {
        let s = PullStrategy::default();
        s.validate(60, 50).unwrap();
        let dead = PullStrategy {
            lead_rate: Fraction::from_integer(0),
            ..s.clone()
        };
        assert_eq!(dead.validate(60, 50), Err(PullError::NoPull));
        let slow = PullStrategy {
            lead_rate: Fraction::new(1, 10000),
            ..s.clone()
        };
        assert_eq!(slow.validate(60, 50), Err(PullError::NotMonotone));
        let slow = PullStrategy {
            far_rate: Fraction::new(1, 10000),
            mid_rate: Fraction::new(1, 10000),
            lead_rate: Fraction::new(1, 10000),
            post_turn: PostTurn::Active,
            ..s
        };
        assert!(matches!(
            slow.validate(60, 50),
            Err(PullError::Disconnects { .. })
        ));
    }

    #[test]
    fn probes_alternate_outwards() {
        assert_eq!(probe_order(4, 0, 8), vec![4, 3, 5, 2, 6, 1, 7]);
        assert_eq!(probe_order(1, 0, 4), vec![1, 2, 3]);
    }
}
