//! The event loop. One global tick counter; per tick the loop applies due
//! faults, delivers due messages in send order, then steps every live node
//! in roster order. Nodes read time through their own clock skew.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use thiserror::Error;

use super::metrics::{FinalityRecord, ForkRecord, Metrics, StorageSample, Trace, VoteRecord};
use super::scenario::{Behavior, FaultEvent, FaultKind};
use crate::chain::{
    block_findings, link_target, make_transaction, sha256_parts, Block, BlockKind, Chain,
    GenesisConfig, Hash32, NodeId, NodeKey, Transaction, TransactionKind,
};
use crate::config::{PeeringMode, SimConfig, StorageMode};
use crate::consensus::{
    open_vote, resolve_fork, ActivityTracker, AdaptEvent, AdaptivePolicy, AdaptiveState, Ballot,
    Branch, EarlyFinalizeMode, FinalityStatus, FinalityTracker, ForkPolicy, Outcome, PotState,
    Resolution, ScheduleAdjustment, TieBreak, TurnSchedule, VoteQuestion,
};
use crate::contracts::{bloat, commit, CommitMode, CommitOptions, Committed};
use crate::peering::{push_round, relative_index, PullStrategy, PushTree};
use crate::storage::{
    designated_gcn, meta_state_cut, prune, read_meta_block, replay_to, untidy_size, verify_prune,
    ChildManager, GameState, GcPolicy, KeyValueState, RevealView,
};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

/// Body prefix of payloads that spend a game resource; two different
/// bodies for the same key are mutually exclusive.
const SPEND_PREFIX: &str = "spend:";
/// Body prefix of a claim on a contested resource; the first claim on a
/// branch wins, so branches with different first claims exclude each other.
const CLAIM_PREFIX: &str = "claim:";

#[derive(Debug, Clone)]
enum Payload {
    Block(Block),
    SyncRequest,
    ChainOffer(Vec<Block>),
}

#[derive(Debug, Clone)]
struct Envelope {
    from: usize,
    to: usize,
    payload: Payload,
}

/// Everything one node owns.
#[derive(Debug, Clone)]
pub struct SimNode {
    pub index: usize,
    pub key: NodeKey,
    pub state: PotState,
    pub finality: FinalityTracker,
    pub activity: ActivityTracker,
    adaptive: AdaptiveState,
    pub skew: i64,
    pub crashed: bool,
    pub silenced_until: Tick,
    pub behaviors: BTreeSet<Behavior>,
    rng: ChaCha20Rng,
    to_reveal: Vec<Committed>,
    pool: Vec<Transaction>,
    written: BTreeSet<u64>,
    sealed: BTreeSet<u64>,
    next_complete: u64,
    missed_streak: u64,
    grace_checked: BTreeSet<u64>,
    /// First data block seen per (author, turn, parent).
    seen: BTreeMap<(usize, u64, Hash32), Hash32>,
    disputed: BTreeSet<Hash32>,
    dead: BTreeSet<Hash32>,
    finals: BTreeMap<Hash32, Tick>,
    children: ChildManager,
    child_bytes: BTreeMap<Hash32, u64>,
    child_freed: u64,
    sync_wait: BTreeMap<usize, Tick>,
    down: bool,
}

impl SimNode {
    pub fn label(&self) -> &str {
        &self.key.id().label
    }

    pub fn chain(&self) -> &Chain {
        self.state.chain()
    }

    pub fn is_byzantine(&self) -> bool {
        !self.behaviors.is_empty()
    }

    /// Data blocks this node marked effectively final, with the tick.
    pub fn finals(&self) -> &BTreeMap<Hash32, Tick> {
        &self.finals
    }

    /// Stored bytes: the chain minus child chains already dropped.
    pub fn stored_bytes(&self) -> u64 {
        self.chain().total_size().saturating_sub(self.child_freed)
    }
}

/// Output of one run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub config: SimConfig,
    pub trace: Trace,
    pub metrics: Metrics,
    pub nodes: Vec<SimNode>,
}

impl SimResult {
    pub fn digest(&self) -> Hash32 {
        self.trace.digest()
    }
}

pub struct Simulator {
    config: SimConfig,
    events: Vec<FaultEvent>,
    next_event: usize,
    nodes: Vec<SimNode>,
    ids: Vec<NodeId>,
    index_of: HashMap<[u8; 32], usize>,
    latency: Vec<Vec<Tick>>,
    groups: Option<Vec<usize>>,
    queue: BTreeMap<(Tick, u64), Envelope>,
    seq: u64,
    verified: HashMap<Hash32, bool>,
    blocks: HashMap<Hash32, Block>,
    trace: Trace,
    metrics: Metrics,
    disputes: BTreeSet<(usize, u64, Hash32)>,
    fork_points: BTreeSet<(Hash32, Hash32, Hash32)>,
    missed: BTreeSet<u64>,
    grace_turns: BTreeSet<u64>,
    /// Tip at the last compaction attempt.
    maintained: Option<Hash32>,
    /// Leaders only reveal, opening nothing new, until a meta cut lands.
    draining: bool,
    now: Tick,
}

/// Run a configuration with a fault script.
pub fn run(config: &SimConfig, events: &[FaultEvent]) -> Result<SimResult, SimError> {
    Ok(Simulator::new(config, events)?.run())
}

/// Signing keys of the simulated roster; a pure function of seed and size.
pub fn roster_keys(config: &SimConfig) -> Vec<NodeKey> {
    (0..config.nodes)
        .map(|i| NodeKey::from_seed(format!("n{i}"), node_seed(config.seed, i, b"pot-sim-key")))
        .collect()
}

fn node_seed(seed: u64, i: usize, tag: &[u8]) -> [u8; 32] {
    sha256_parts(&[tag, &seed.to_le_bytes(), &(i as u64).to_le_bytes()]).0
}

fn prefixed_entry<'a>(tx: &'a Transaction, prefix: &str) -> Option<(&'a str, &'a [u8])> {
    if tx.kind != TransactionKind::Payload {
        return None;
    }
    let text = std::str::from_utf8(&tx.body).ok()?;
    let rest = text.strip_prefix(prefix)?;
    let (key, _) = rest.split_once('=')?;
    Some((key, &tx.body))
}

fn spend_entry(tx: &Transaction) -> Option<(&str, &[u8])> {
    prefixed_entry(tx, SPEND_PREFIX)
}

fn exclusive_entry(tx: &Transaction) -> Option<(&str, &[u8])> {
    spend_entry(tx).or_else(|| prefixed_entry(tx, CLAIM_PREFIX))
}

/// First body per exclusive key over `prefix` followed by `branch`.
fn first_entries<'a>(prefix: &'a [Block], branch: &'a [Block]) -> BTreeMap<&'a str, &'a [u8]> {
    let mut first = BTreeMap::new();
    for tx in prefix.iter().chain(branch).flat_map(|b| &b.transactions) {
        if let Some((k, body)) = exclusive_entry(tx) {
            first.entry(k).or_insert(body);
        }
    }
    first
}

fn exclusive_conflict(prefix: &[Block], a: &[Block], b: &[Block]) -> bool {
    let fa = first_entries(prefix, a);
    first_entries(prefix, b)
        .into_iter()
        .any(|(k, body)| fa.get(k).is_some_and(|other| *other != body))
}

fn describe(q: &VoteQuestion) -> String {
    match q {
        VoteQuestion::InvalidateTx(h) => format!("invalidate-tx:{}", h.short()),
        VoteQuestion::InvalidateBlockTxs(v) => format!("invalidate-block:{}txs", v.len()),
        VoteQuestion::KickNode(n) => format!("kick:{}", n.label),
        VoteQuestion::Pause { at, length } => format!("pause:{at}+{length}"),
        VoteQuestion::AcceptPrune => "accept-compaction".into(),
        VoteQuestion::AdmitNode(n) => format!("admit:{}", n.label),
        VoteQuestion::ForkChoice(i) => format!("fork-choice:{i}"),
    }
}

impl Simulator {
    pub fn new(config: &SimConfig, events: &[FaultEvent]) -> Result<Self, SimError> {
        config.validate().map_err(|e| match e {
            crate::config::ConfigError::Invalid(m) => SimError::ConfigInvalid(m),
            other => SimError::ConfigInvalid(other.to_string()),
        })?;
        let n = config.nodes;
        if let Some(e) = events
            .iter()
            .find(|e| e.kind.nodes().iter().any(|&i| i >= n))
        {
            return Err(SimError::ConfigInvalid(format!(
                "scenario names a node outside the roster: {e}"
            )));
        }
        let keys = roster_keys(config);
        let ids: Vec<NodeId> = keys.iter().map(|k| k.id().clone()).collect();
        let genesis = GenesisConfig {
            network_id: "pot-sim".into(),
            turn_duration: config.turn,
            transition_duration: config.transition,
            roster: ids.clone(),
        };
        let schedule = TurnSchedule::new(ids.clone(), config.turn, config.transition)
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?
            .with_mode(EarlyFinalizeMode::WaitRegularSlot);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut latency = vec![vec![0; n]; n];
        for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
            let d = rng.gen_range(1..=config.latency);
            latency[i][j] = d;
            latency[j][i] = d;
        }
        let child_capacity = crate::storage::bytes_to_mb(config.prune_cap.max(config.tx_size));
        let nodes = keys
            .into_iter()
            .enumerate()
            .map(|(i, key)| SimNode {
                index: i,
                state: PotState::new(schedule.clone(), genesis.chain()),
                finality: FinalityTracker::new(config.theta, n, n as u64),
                activity: ActivityTracker::new(config.activity_window),
                adaptive: AdaptiveState::new(AdaptivePolicy {
                    grace: config.grace,
                    ..AdaptivePolicy::default()
                }),
                skew: 0,
                crashed: false,
                silenced_until: 0,
                behaviors: BTreeSet::new(),
                rng: ChaCha20Rng::from_seed(node_seed(config.seed, i, b"pot-sim-rng")),
                to_reveal: Vec::new(),
                pool: Vec::new(),
                written: BTreeSet::new(),
                sealed: BTreeSet::new(),
                next_complete: 0,
                missed_streak: 0,
                grace_checked: BTreeSet::new(),
                seen: BTreeMap::new(),
                disputed: BTreeSet::new(),
                dead: BTreeSet::new(),
                finals: BTreeMap::new(),
                children: ChildManager::new(child_capacity),
                child_bytes: BTreeMap::new(),
                child_freed: 0,
                sync_wait: BTreeMap::new(),
                down: false,
                key,
            })
            .collect();
        let index_of = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.public_key, i))
            .collect();
        let mut events = events.to_vec();
        events.sort_by_key(|e| e.at);
        let mut trace = Trace::default();
        trace.push(
            0,
            "sim",
            "start",
            format!(
                "config={} scenario={}",
                crate::chain::sha256(config.to_text().as_bytes()).short(),
                crate::chain::sha256(super::scenario::scenario_text(&events).as_bytes()).short()
            ),
        );
        Ok(Simulator {
            config: config.clone(),
            events,
            next_event: 0,
            nodes,
            ids,
            index_of,
            latency,
            groups: None,
            queue: BTreeMap::new(),
            seq: 0,
            verified: HashMap::new(),
            blocks: HashMap::new(),
            trace,
            metrics: Metrics::default(),
            disputes: BTreeSet::new(),
            fork_points: BTreeSet::new(),
            missed: BTreeSet::new(),
            grace_turns: BTreeSet::new(),
            maintained: None,
            draining: false,
            now: 0,
        })
    }

    pub fn run(mut self) -> SimResult {
        let horizon = self.config.horizon();
        for t in 0..horizon {
            self.now = t;
            self.apply_faults();
            self.deliver_due();
            self.count_leaders();
            for i in 0..self.nodes.len() {
                self.step(i);
            }
            self.maintain_storage();
        }
        self.finish()
    }

    // ----- network -------------------------------------------------------

    fn alive(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        !n.crashed && self.now >= n.silenced_until
    }

    fn connected(&self, a: usize, b: usize) -> bool {
        self.groups.as_ref().is_none_or(|g| g[a] == g[b])
    }

    fn reachable(&self, a: usize, b: usize) -> bool {
        self.alive(a) && self.alive(b) && self.connected(a, b)
    }

    fn participants(&self, caller: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&p| p == caller || self.reachable(caller, p))
            .collect()
    }

    fn send(&mut self, from: usize, to: usize, delay: Tick, payload: Payload, kind: &str) {
        self.metrics.count_message(kind, 1);
        self.seq += 1;
        self.queue.insert(
            (self.now + delay.max(1), self.seq),
            Envelope { from, to, payload },
        );
    }

    fn push_delay(&self, src: usize, dst: usize) -> Option<Tick> {
        let n = self.nodes.len();
        let online: BTreeSet<usize> = (0..n)
            .filter(|&j| self.reachable(src, j))
            .map(|j| relative_index(j, src, n))
            .collect();
        let rel = relative_index(dst, src, n);
        push_round(&PushTree::new(n), &online, 0).hops_of(rel)?;
        let mut delay = 0;
        let mut at = rel;
        while at != 0 {
            let parent = if at < 10 { 0 } else { at / 10 };
            delay += self.latency[(src + parent) % n][(src + at) % n];
            at = parent;
        }
        Some(delay)
    }

    fn pull_delay(&self, src: usize, dst: usize) -> Tick {
        let n = self.nodes.len();
        let overflow = self.nodes[dst].state.schedule().overflow();
        let x = PullStrategy::index_of(dst, src, n, overflow);
        let iv = PullStrategy::default()
            .interval(x, self.config.turn, n)
            .ceil()
            .to_integer()
            .max(1);
        let next_pull = (self.now / iv + 1) * iv;
        next_pull - self.now + 2 * self.latency[src][dst]
    }

    /// Spread a block from its author through the configured peering mode.
    fn disseminate(&mut self, src: usize, block: &Block) {
        for dst in 0..self.nodes.len() {
            if dst == src {
                continue;
            }
            let delay = match self.config.peering {
                PeeringMode::Push => self.push_delay(src, dst),
                PeeringMode::Pull => Some(self.pull_delay(src, dst)),
                PeeringMode::Mixed => Some(
                    self.push_delay(src, dst)
                        .map_or(self.pull_delay(src, dst), |p| {
                            p.min(self.pull_delay(src, dst))
                        }),
                ),
            };
            if let Some(d) = delay {
                self.send(src, dst, d, Payload::Block(block.clone()), "block");
            }
        }
    }

    fn deliver_due(&mut self) {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            let env = entry.remove();
            if !self.alive(env.to) || !self.connected(env.from, env.to) {
                self.metrics.count_message("dropped", 1);
                continue;
            }
            match env.payload {
                Payload::Block(b) => self.receive_block(env.to, env.from, b),
                Payload::SyncRequest => {
                    let blocks = self.nodes[env.to].chain().blocks().to_vec();
                    let d = self.latency[env.to][env.from];
                    self.send(
                        env.to,
                        env.from,
                        d,
                        Payload::ChainOffer(blocks),
                        "chain-offer",
                    );
                }
                Payload::ChainOffer(blocks) => self.receive_chain(env.to, env.from, blocks),
            }
        }
    }

    fn request_sync(&mut self, i: usize, from: usize) {
        if i == from
            || self.nodes[i]
                .sync_wait
                .get(&from)
                .is_some_and(|&t| t > self.now)
        {
            return;
        }
        let d = self.latency[i][from];
        self.nodes[i].sync_wait.insert(from, self.now + 2 * d + 1);
        self.send(i, from, d, Payload::SyncRequest, "sync-request");
    }

    // ----- faults --------------------------------------------------------

    fn apply_faults(&mut self) {
        while let Some(e) = self.events.get(self.next_event).cloned() {
            if e.at > self.now {
                break;
            }
            self.next_event += 1;
            self.trace.push(self.now, "sim", "fault", e.to_string());
            match e.kind {
                FaultKind::Partition(groups) => {
                    let n = self.nodes.len();
                    let mut g: Vec<usize> = (0..n).map(|i| groups.len() + i).collect();
                    for (gi, members) in groups.iter().enumerate() {
                        for &m in members {
                            g[m] = gi;
                        }
                    }
                    self.groups = Some(g);
                }
                FaultKind::Heal => {
                    self.groups = None;
                    for i in 0..self.nodes.len() {
                        if !self.alive(i) {
                            continue;
                        }
                        let blocks = self.nodes[i].chain().blocks().to_vec();
                        for j in 0..self.nodes.len() {
                            if j != i && self.alive(j) {
                                let d = self.latency[i][j];
                                self.send(
                                    i,
                                    j,
                                    d,
                                    Payload::ChainOffer(blocks.clone()),
                                    "chain-offer",
                                );
                            }
                        }
                    }
                }
                FaultKind::Crash(i) => {
                    self.nodes[i].crashed = true;
                    self.nodes[i].down = true;
                }
                FaultKind::Recover(i) => self.nodes[i].crashed = false,
                FaultKind::Silence { node, duration } => {
                    self.nodes[node].silenced_until = self.now + duration;
                    self.nodes[node].down = true;
                }
                FaultKind::Byzantine { node, behavior } => {
                    self.nodes[node].behaviors.insert(behavior);
                }
                FaultKind::ClockSkew { node, offset } => self.nodes[node].skew = offset,
            }
        }
    }

    /// A node back from a crash or silence adopts the agreed schedule of a
    /// peer and asks it for the chain.
    fn rejoin(&mut self, i: usize) {
        self.nodes[i].down = false;
        let lt = self.local_time(i);
        if let Some(peer) = (0..self.nodes.len()).find(|&j| j != i && self.reachable(i, j)) {
            let schedule = self.nodes[peer].state.schedule().clone();
            self.nodes[i].state.set_schedule(schedule, lt);
            self.request_sync(i, peer);
        }
        let node = &mut self.nodes[i];
        let turn = node.state.timeline().slot_at(lt).turn;
        node.next_complete = turn;
        node.grace_checked.insert(turn);
        node.missed_streak = 0;
        self.trace.push(self.now, node.label(), "rejoin", "");
    }

    // ----- node logic ----------------------------------------------------

    fn local_time(&self, i: usize) -> Tick {
        (self.now as i64 + self.nodes[i].skew).max(0) as Tick
    }

    fn structurally_valid(&mut self, b: &Block) -> bool {
        let h = b.hash();
        *self
            .verified
            .entry(h)
            .or_insert_with(|| block_findings(b).is_empty())
    }

    fn author_index(&self, id: &NodeId) -> Option<usize> {
        self.index_of.get(&id.public_key).copied()
    }

    fn holds(&self, i: usize, h: &Hash32, height: u64) -> bool {
        self.nodes[i]
            .chain()
            .block_at(height)
            .is_some_and(|b| b.hash() == *h)
    }

    fn count_leaders(&mut self) {
        let mut leaders = Vec::new();
        for i in 0..self.nodes.len() {
            if !self.alive(i) {
                continue;
            }
            let lt = self.local_time(i);
            let node = &mut self.nodes[i];
            let slot = node.state.timeline().slot_at(lt);
            if slot.leader == *node.key.id() && lt < slot.end {
                leaders.push(node.label().to_string());
            }
        }
        if leaders.len() > 1 {
            self.metrics.dual_leader_ticks += 1;
            self.trace
                .push(self.now, "sim", "dual-leader", leaders.join(","));
        }
    }

    fn step(&mut self, i: usize) {
        if !self.alive(i) {
            return;
        }
        if self.nodes[i].down {
            self.rejoin(i);
        }
        let lt = self.local_time(i);
        loop {
            let node = &mut self.nodes[i];
            let turn = node.next_complete;
            let slot = node.state.timeline().slot(turn).clone();
            if slot.next_start > lt {
                break;
            }
            node.next_complete += 1;
            self.complete_turn(i, turn, &slot.leader);
        }
        let slot = self.nodes[i].state.timeline().slot_at(lt).clone();
        let me = self.ids[i].clone();
        let in_turn = lt < slot.end;
        if slot.leader == me {
            let late = self.nodes[i].behaviors.contains(&Behavior::LateBlock);
            let fresh = !self.nodes[i].written.contains(&slot.turn);
            if in_turn {
                if fresh && !late && lt + self.config.transition < slot.end {
                    self.write_data(i, slot.turn, lt);
                }
                if lt + 1 >= slot.end && !self.nodes[i].sealed.contains(&slot.turn) {
                    self.seal(i, slot.turn, lt);
                }
            } else if fresh && late {
                self.write_late(i, slot.turn, lt);
            }
        } else if in_turn && self.config.grace > 0 && lt >= slot.start + self.config.turn / 2 {
            self.check_grace(i, slot.turn, &slot.leader);
        }
    }

    fn turn_written(&self, i: usize, turn: u64, leader: &NodeId) -> bool {
        self.nodes[i]
            .chain()
            .blocks()
            .iter()
            .rev()
            .take(4 * self.nodes.len() + 8)
            .any(|b| b.turn_index == turn && b.author == *leader)
    }

    fn complete_turn(&mut self, i: usize, turn: u64, leader: &NodeId) {
        let wrote = self.turn_written(i, turn, leader);
        let honest = !self.nodes[i].is_byzantine();
        {
            let node = &mut self.nodes[i];
            node.activity.turn_result(leader, wrote);
            let active = node.activity.active(self.ids.iter()).len();
            node.finality.set_active(active);
            if wrote {
                node.missed_streak = 0;
            } else {
                node.missed_streak += 1;
            }
        }
        if !wrote && honest && self.missed.insert(turn) {
            self.metrics.missed_turns += 1;
        }
        let pending: Vec<(Hash32, NodeId)> = self.nodes[i]
            .finality
            .blocks()
            .filter(|(_, b)| b.status == FinalityStatus::Pending)
            .map(|(h, b)| (*h, b.author.clone()))
            .collect();
        for (h, author) in pending {
            let Some(height) = self.blocks.get(&h).map(|b| b.height) else {
                continue;
            };
            if !self.holds(i, &h, height) {
                continue;
            }
            let passer = if wrote { leader } else { &author };
            if let Ok(FinalityStatus::EffectiveFinal) =
                self.nodes[i].finality.record_pass(&h, passer)
            {
                self.mark_final(i, h);
            }
        }
        if honest {
            self.metrics.turns_completed = self.metrics.turns_completed.max(turn + 1);
        }
        let node = &self.nodes[i];
        self.metrics.storage.push(StorageSample {
            tick: self.now,
            node: node.label().to_string(),
            tx_count: node.chain().transactions().count() as u64,
            bytes: node.stored_bytes(),
        });
        if honest && self.nodes[i].missed_streak >= self.config.stall_turns {
            self.reset_after_stall(i);
        }
    }

    fn mark_final(&mut self, i: usize, h: Hash32) {
        let Some(b) = self.blocks.get(&h) else { return };
        let rec = FinalityRecord {
            node: self.nodes[i].label().to_string(),
            block: h,
            height: b.height,
            created: b.logical_time,
            finalized: self.now,
        };
        self.trace.push(
            self.now,
            &rec.node,
            "final",
            format!("{} h={}", h.short(), b.height),
        );
        self.nodes[i].finals.insert(h, self.now);
        self.metrics.cf_latency.push(rec);
    }

    fn check_grace(&mut self, i: usize, turn: u64, leader: &NodeId) {
        if !self.nodes[i].grace_checked.insert(turn) || self.grace_turns.contains(&turn) {
            return;
        }
        if self.turn_written(i, turn, leader) || self.nodes[i].activity.missed(leader) > 0 {
            return;
        }
        let adj = match self.nodes[i]
            .adaptive
            .adapt_turn_time(&AdaptEvent::LostLeader { turn }, None)
        {
            Ok(a) => a,
            Err(_) => return,
        };
        self.grace_turns.insert(turn);
        self.metrics.graces += 1;
        for p in self.participants(i) {
            let plt = self.local_time(p);
            self.nodes[p].state.apply_adjustment(adj, plt);
        }
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "grace",
            format!(
                "turn={turn} leader={} extra={}",
                leader.label, self.config.grace
            ),
        );
    }

    fn reset_after_stall(&mut self, i: usize) {
        let lt = self.local_time(i);
        let length = self.config.turn + self.config.transition;
        let q = VoteQuestion::Pause { at: lt, length };
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "stall",
            format!("missed={}", self.nodes[i].missed_streak),
        );
        let (outcome, parts) = self.network_vote(i, q, None);
        self.nodes[i].missed_streak = 0;
        if !outcome.passed {
            return;
        }
        let adj = ScheduleAdjustment::Pause { at: lt, length };
        for p in parts {
            self.nodes[p].state.apply_adjustment(adj, lt);
            self.nodes[p].missed_streak = 0;
        }
        self.metrics.resets += 1;
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "reset",
            format!("pause={length}"),
        );
    }

    fn workload(&mut self, i: usize, turn: u64) -> Vec<Transaction> {
        let pad = Some(self.config.tx_size);
        let n = self.nodes.len() as u64;
        let flood = if self.nodes[i].behaviors.contains(&Behavior::FloodBloat) {
            self.config.flood_txs
        } else {
            0
        };
        let draining = self.draining;
        let node = &mut self.nodes[i];
        let mut txs = Vec::new();
        for c in std::mem::take(&mut node.to_reveal) {
            txs.push(c.reveal_tx(&node.key, &mut node.rng).expect("reveal fits"));
        }
        let opts = CommitOptions {
            salted: true,
            created_turn: turn,
            reveal_deadline: turn + 2 * n,
            pad_to: pad,
        };
        let label = node.key.id().label.clone();
        txs.push(
            make_transaction(
                &node.key,
                TransactionKind::Payload,
                format!("{label}.turn={turn}").into_bytes(),
                pad,
                &mut node.rng,
            )
            .expect("move fits the padding"),
        );
        let round = turn / n;
        txs.push(
            make_transaction(
                &node.key,
                TransactionKind::Payload,
                format!("{CLAIM_PREFIX}planet{round}={label}").into_bytes(),
                pad,
                &mut node.rng,
            )
            .expect("claim fits the padding"),
        );
        if !draining {
            let mv = commit(
                &node.key,
                format!("move:{label}:{turn}").as_bytes(),
                CommitMode::GameHash,
                opts,
                &mut node.rng,
            )
            .expect("commitment fits the padding");
            txs.push(mv.tx.clone());
            node.to_reveal.push(mv);
            for _ in 0..1 + flood {
                let b = bloat(&node.key, 16, opts, &mut node.rng).expect("bloat fits the padding");
                txs.push(b.tx.clone());
                node.to_reveal.push(b);
            }
        }
        let pool = std::mem::take(&mut node.pool);
        let chain = node.state.chain();
        for tx in pool {
            if chain.find_transaction(&tx.id).is_none() && txs.iter().all(|t| t.id != tx.id) {
                txs.push(tx);
            }
        }
        txs
    }

    fn spend_tx(&mut self, i: usize, turn: u64, variant: &str) -> Transaction {
        let node = &mut self.nodes[i];
        let body = format!("{SPEND_PREFIX}{}:{turn}={variant}", node.key.id().label);
        make_transaction(
            &node.key,
            TransactionKind::Payload,
            body.into_bytes(),
            None,
            &mut node.rng,
        )
        .expect("unpadded")
    }

    fn note_block(&mut self, b: &Block) {
        let h = b.hash();
        self.verified.insert(h, true);
        self.blocks.insert(h, b.clone());
    }

    fn write_data(&mut self, i: usize, turn: u64, lt: Tick) {
        if self.nodes[i].behaviors.contains(&Behavior::VoteNo) {
            self.attack_honest_block(i);
        }
        let mut txs = self.workload(i, turn);
        let equivocate = self.nodes[i].behaviors.contains(&Behavior::EquivocateSplit);
        let twin_txs = if equivocate {
            let mut alt = txs.clone();
            txs.push(self.spend_tx(i, turn, "a"));
            alt.push(self.spend_tx(i, turn, "b"));
            Some(alt)
        } else {
            None
        };
        let node = &mut self.nodes[i];
        let block = match node.state.propose_block(&node.key, txs, lt) {
            Ok(b) => b,
            Err(e) => {
                self.trace
                    .push(self.now, &self.ids[i].label, "write-failed", e.to_string());
                return;
            }
        };
        node.written.insert(turn);
        self.metrics.data_blocks += 1;
        self.note_block(&block);
        self.remember(i, &block);
        self.track(i, &block);
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "data",
            format!("turn={turn} h={} {}", block.height, block.hash().short()),
        );
        match twin_txs {
            None => self.disseminate(i, &block),
            Some(alt) => {
                let twin = Block::new(
                    block.height,
                    block.prev_hash,
                    self.ids[i].clone(),
                    turn,
                    lt,
                    BlockKind::Data,
                    alt,
                )
                .signed(&self.nodes[i].key);
                self.note_block(&twin);
                self.trace.push(
                    self.now,
                    &self.ids[i].label,
                    "equivocate",
                    format!("{} {}", block.hash().short(), twin.hash().short()),
                );
                for j in 0..self.nodes.len() {
                    if j == i {
                        continue;
                    }
                    let b = if j % 2 == 0 { &block } else { &twin };
                    let d = self.latency[i][j];
                    self.send(i, j, d, Payload::Block(b.clone()), "block");
                }
            }
        }
    }

    /// A data block published in the transition after its turn.
    fn write_late(&mut self, i: usize, turn: u64, lt: Tick) {
        let txs = self.workload(i, turn);
        let node = &mut self.nodes[i];
        node.written.insert(turn);
        let tip = node.state.chain().tip();
        let block = Block::new(
            tip.height + 1,
            link_target(tip),
            node.key.id().clone(),
            turn,
            lt,
            BlockKind::Data,
            txs,
        )
        .signed(&node.key);
        if node.state.chain_mut().append_linked(block.clone()).is_err() {
            return;
        }
        self.metrics.data_blocks += 1;
        self.note_block(&block);
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "late-data",
            format!("turn={turn} t={lt}"),
        );
        self.disseminate(i, &block);
    }

    fn seal(&mut self, i: usize, turn: u64, lt: Tick) {
        self.nodes[i].sealed.insert(turn);
        let succ_id = self.nodes[i].state.schedule().leader_of(turn + 1).clone();
        let succ = self.author_index(&succ_id).expect("roster member");
        let result = if succ != i && self.reachable(i, succ) {
            let co = self.nodes[succ].key.clone();
            let node = &mut self.nodes[i];
            node.state.handover(&node.key, &succ_id, Some(&co), lt)
        } else {
            let node = &mut self.nodes[i];
            node.state.finalize_turn(&node.key, lt)
        };
        let block = match result {
            Ok(b) => b,
            Err(e) => {
                self.trace
                    .push(self.now, &self.ids[i].label, "seal-failed", e.to_string());
                return;
            }
        };
        let kind = if block.kind == BlockKind::Handover {
            self.metrics.handovers += 1;
            "handover"
        } else {
            self.metrics.finalizing += 1;
            "finalize"
        };
        self.note_block(&block);
        self.trace.push(
            self.now,
            &self.ids[i].label,
            kind,
            format!("turn={turn} h={}", block.height),
        );
        self.disseminate(i, &block);
        if block.kind == BlockKind::Handover {
            let d = self.latency[i][succ];
            self.send(i, succ, d, Payload::Block(block), "handover-direct");
        }
    }

    /// Remember a data block; a second, different block by the same author
    /// for the same turn and parent is an equivocation.
    fn remember(&mut self, i: usize, b: &Block) -> Option<Hash32> {
        if b.kind != BlockKind::Data {
            return None;
        }
        let author = self.author_index(&b.author)?;
        let h = b.hash();
        let prev = *self.nodes[i]
            .seen
            .entry((author, b.turn_index, b.prev_hash))
            .or_insert(h);
        (prev != h).then_some(prev)
    }

    fn track(&mut self, i: usize, b: &Block) {
        let h = b.hash();
        let node = &mut self.nodes[i];
        if b.kind == BlockKind::Data {
            node.finality.track(h, b.author.clone());
            if node.dead.contains(&h) {
                let _ = node.finality.invalidate(&h);
                for tx in &b.transactions {
                    let _ = node.state.chain_mut().invalidate(tx.id);
                }
            } else if node.disputed.contains(&h) {
                let _ = node.finality.set_disputed(&h, true);
            }
        }
        if b.kind.is_transition() {
            node.state
                .timeline()
                .terminate(b.turn_index, b.logical_time);
        }
        if self.config.storage == StorageMode::Child {
            self.child_account(i, b);
        }
    }

    fn child_account(&mut self, i: usize, b: &Block) {
        let node = &mut self.nodes[i];
        for tx in &b.transactions {
            if tx.kind.is_commitment() {
                if node.children.route_to_child(tx).is_ok() {
                    node.child_bytes.insert(tx.id, tx.declared_size);
                }
            } else if let Some(target) = crate::chain::reveal_target(tx) {
                let _ = node
                    .children
                    .reveal_on_child(&target, tx.body.clone(), tx.clone());
            }
        }
        let dropping: Vec<Hash32> = node
            .children
            .children()
            .filter(|c| c.state == crate::storage::ChildState::Deletable)
            .flat_map(|c| c.entries.iter().map(|e| e.commitment))
            .collect();
        node.children.gc_children(GcPolicy::Delete);
        for c in dropping {
            node.child_freed += node.child_bytes.remove(&c).unwrap_or(0);
        }
    }

    fn acceptable(&mut self, i: usize, b: &Block) -> Result<(), &'static str> {
        if b.kind.is_genesis() {
            return Err("genesis");
        }
        let lt = self.local_time(i);
        let node = &mut self.nodes[i];
        let current = node.state.timeline().slot_at(lt).turn;
        if b.turn_index > current + node.state.schedule().len() as u64 {
            return Err("future-turn");
        }
        let schedule = node.state.schedule().clone();
        if b.author != *schedule.leader_of(b.turn_index) {
            return Err("not-leader");
        }
        let slot = node.state.timeline().slot(b.turn_index).clone();
        if b.logical_time < slot.start || b.logical_time >= slot.nominal_end {
            return Err("outside-turn");
        }
        if b.kind == BlockKind::Data && b.logical_time + self.config.transition >= slot.nominal_end
        {
            return Err("writing-window-closed");
        }
        if b.kind == BlockKind::Handover
            && b.signatures.get(1).map(|s| &s.signer) != Some(schedule.leader_of(b.turn_index + 1))
        {
            return Err("wrong-successor");
        }
        Ok(())
    }

    fn receive_block(&mut self, i: usize, from: usize, b: Block) {
        if !self.structurally_valid(&b) {
            self.metrics.rejected_blocks += 1;
            self.trace
                .push(self.now, &self.ids[i].label, "reject", "bad-structure");
            return;
        }
        let h = b.hash();
        self.blocks.entry(h).or_insert_with(|| b.clone());
        if let Some(prev) = self.remember(i, &b) {
            self.dispute(i, prev, h);
        }
        if self.holds(i, &h, b.height) {
            return;
        }
        if let Err(reason) = self.acceptable(i, &b) {
            self.metrics.rejected_blocks += 1;
            self.trace.push(
                self.now,
                &self.ids[i].label,
                "reject",
                format!("{reason} {} from={}", h.short(), self.ids[from].label),
            );
            return;
        }
        let tip = self.nodes[i].chain().tip();
        if b.height == tip.height + 1 && b.prev_hash == link_target(tip) {
            if self.nodes[i]
                .state
                .chain_mut()
                .append_linked(b.clone())
                .is_ok()
            {
                self.track(i, &b);
            }
        } else {
            self.request_sync(i, from);
        }
    }

    fn receive_chain(&mut self, i: usize, from: usize, offered: Vec<Block>) {
        let own = self.nodes[i].chain();
        let Some(j) = offered
            .iter()
            .rposition(|b| own.block_at(b.height).is_some_and(|o| o.hash() == b.hash()))
        else {
            self.trace.push(
                self.now,
                &self.ids[i].label,
                "sync-unrelated",
                self.ids[from].label.as_str(),
            );
            return;
        };
        let anchor_height = offered[j].height;
        let mut other = Vec::new();
        for b in &offered[j + 1..] {
            if !self.structurally_valid(b) || self.acceptable(i, b).is_err() {
                break;
            }
            other.push(b.clone());
        }
        for b in &other {
            let h = b.hash();
            self.blocks.entry(h).or_insert_with(|| b.clone());
            if let Some(prev) = self.remember(i, b) {
                self.dispute(i, prev, h);
            }
        }
        if other.is_empty() {
            return;
        }
        let own_suffix: Vec<Block> = self.nodes[i]
            .chain()
            .blocks()
            .iter()
            .filter(|b| b.height > anchor_height)
            .cloned()
            .collect();
        if own_suffix.is_empty() {
            for b in other {
                if self.nodes[i]
                    .state
                    .chain_mut()
                    .append_linked(b.clone())
                    .is_err()
                {
                    break;
                }
                self.track(i, &b);
            }
            return;
        }
        self.resolve(i, anchor_height, own_suffix, other);
    }

    fn resolve(&mut self, i: usize, anchor_height: u64, own: Vec<Block>, other: Vec<Block>) {
        let anchor = own[0].prev_hash;
        let (first_own, first_other) = (own[0].hash(), other[0].hash());
        let swap = first_other < first_own;
        let branches = if swap {
            vec![Branch::new(other.clone()), Branch::new(own.clone())]
        } else {
            vec![Branch::new(own.clone()), Branch::new(other.clone())]
        };
        let other_idx = usize::from(!swap);
        let point = (
            anchor,
            first_own.min(first_other),
            first_own.max(first_other),
        );
        if self.fork_points.insert(point) {
            self.metrics.forks += 1;
            self.trace.push(
                self.now,
                &self.ids[i].label,
                "fork",
                format!("anchor={} branches={}", anchor.short(), branches.len()),
            );
        }
        let round_start = own[0].turn_index.min(other[0].turn_index) / self.nodes.len() as u64
            * self.nodes.len() as u64;
        let prefix: Vec<Block> = self.nodes[i]
            .chain()
            .blocks()
            .iter()
            .filter(|b| b.height <= anchor_height && b.turn_index >= round_start)
            .cloned()
            .collect();
        let mergeable = !exclusive_conflict(&prefix, &own, &other);
        let randomization = Some(
            sha256_parts(&[b"fork-tie", &anchor.0, &self.config.seed.to_le_bytes()]).low_u64(),
        );
        let mut policy = ForkPolicy {
            mergeable,
            vote: None,
            randomization,
        };
        if !mergeable {
            let preferred = resolve_fork(&branches, &policy)
                .map(|r| r.chosen())
                .unwrap_or(0);
            let (outcome, _) = self.network_vote(i, VoteQuestion::ForkChoice(preferred), None);
            policy.vote = Some((outcome, preferred));
        }
        let Ok(res) = resolve_fork(&branches, &policy) else {
            return;
        };
        let adopt = res.chosen() == other_idx;
        let label = match &res {
            Resolution::Merge { .. } => "merge".to_string(),
            Resolution::VoteChoice { .. } => "vote".to_string(),
            Resolution::ContinueMostProgressive { tie_break, .. } => match tie_break {
                TieBreak::None => "most-progressive".to_string(),
                TieBreak::Randomization { .. } => "most-progressive-random-tie".to_string(),
                TieBreak::LowestAuthor { .. } => "most-progressive-lowest-author".to_string(),
            },
        };
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "fork-resolved",
            format!("{label} adopt_other={}", u8::from(adopt)),
        );
        self.metrics.resolutions.push(ForkRecord {
            tick: self.now,
            node: self.ids[i].label.clone(),
            anchor,
            resolution: label,
            adopted_other: adopt,
        });
        let (kept, lost) = if adopt {
            (&other, &own)
        } else {
            (&own, &other)
        };
        if matches!(res, Resolution::Merge { .. }) {
            let present: BTreeSet<Hash32> = kept
                .iter()
                .flat_map(|b| b.transactions.iter().map(|t| t.id))
                .collect();
            let carried: Vec<Transaction> = lost
                .iter()
                .flat_map(|b| b.transactions.iter())
                .filter(|t| !present.contains(&t.id))
                .cloned()
                .collect();
            self.nodes[i].pool.extend(carried);
        }
        if adopt {
            let node = &mut self.nodes[i];
            let chain = node.state.chain();
            let mut blocks: Vec<Block> = chain
                .blocks()
                .iter()
                .filter(|b| b.height <= anchor_height)
                .cloned()
                .collect();
            blocks.extend(other.iter().cloned());
            let present: BTreeSet<Hash32> = blocks
                .iter()
                .flat_map(|b| b.transactions.iter().map(|t| t.id))
                .collect();
            let invalid = chain
                .invalidated()
                .iter()
                .filter(|t| present.contains(t))
                .copied()
                .collect();
            let fixed = chain.fixed_upto().min(anchor_height);
            *node.state.chain_mut() = Chain::from_parts(blocks, fixed, invalid);
            for b in &other {
                self.track(i, b);
            }
        }
    }

    // ----- votes and disputes ---------------------------------------------

    fn evidence_holds(&self, pair: (Hash32, Hash32)) -> bool {
        let (Some(a), Some(b)) = (self.blocks.get(&pair.0), self.blocks.get(&pair.1)) else {
            return false;
        };
        a.kind == BlockKind::Data
            && b.kind == BlockKind::Data
            && a.author == b.author
            && a.turn_index == b.turn_index
            && a.prev_hash == b.prev_hash
            && pair.0 != pair.1
            && self.verified.get(&pair.0) == Some(&true)
            && self.verified.get(&pair.1) == Some(&true)
    }

    fn ballot(
        &self,
        voter: usize,
        caller: usize,
        q: &VoteQuestion,
        evidence: Option<(Hash32, Hash32)>,
    ) -> Ballot {
        let v = &self.nodes[voter];
        if v.behaviors.contains(&Behavior::VoteNo) {
            return if self.nodes[caller].is_byzantine() {
                Ballot::Yes
            } else {
                Ballot::No
            };
        }
        match q {
            VoteQuestion::InvalidateBlockTxs(_) | VoteQuestion::InvalidateTx(_) => {
                if evidence.is_some_and(|e| self.evidence_holds(e)) {
                    Ballot::Yes
                } else {
                    Ballot::No
                }
            }
            _ => Ballot::Yes,
        }
    }

    /// Call a vote among the caller's reachable peers; ballots are collected
    /// within the deadline and silence counts as consent.
    fn network_vote(
        &mut self,
        caller: usize,
        q: VoteQuestion,
        evidence: Option<(Hash32, Hash32)>,
    ) -> (Outcome, Vec<usize>) {
        let parts = self.participants(caller);
        let active = self.nodes[caller].activity.active(self.ids.iter());
        let call = sha256_parts(&[
            b"vote",
            &self.now.to_le_bytes(),
            &(caller as u64).to_le_bytes(),
            describe(&q).as_bytes(),
        ]);
        let deadline = self.now + self.config.transition;
        let mut vs = open_vote(call, q.clone(), self.now, deadline, self.config.theta);
        for &p in &parts {
            if active.contains(&self.ids[p]) {
                let b = self.ballot(p, caller, &q, evidence);
                vs.cast_ballot(&self.ids[p], b, self.now)
                    .expect("one ballot per voter before the deadline");
            }
        }
        let outcome = vs
            .tally(&active, deadline)
            .expect("tallied at the deadline");
        let others = parts.len().saturating_sub(1) as u64;
        self.metrics.count_message("vote-call", others);
        self.metrics.count_message("ballot", others);
        let rec = VoteRecord {
            tick: self.now,
            caller: self.ids[caller].label.clone(),
            question: describe(&q),
            passed: outcome.passed,
            yes: outcome.yes,
            no: outcome.no,
            silent: outcome.silent,
            active: outcome.active,
        };
        self.trace.push(
            self.now,
            &rec.caller,
            "vote",
            format!(
                "{} passed={} yes={} no={} silent={}",
                rec.question,
                u8::from(rec.passed),
                rec.yes,
                rec.no,
                rec.silent
            ),
        );
        self.metrics.votes.push(rec);
        (outcome, parts)
    }

    fn invalidate_block(&mut self, p: usize, h: Hash32) -> bool {
        let Some(b) = self.blocks.get(&h).cloned() else {
            return false;
        };
        let node = &mut self.nodes[p];
        node.dead.insert(h);
        let removed = match node.finality.invalidate(&h) {
            Ok(()) => true,
            Err(crate::consensus::FinalityError::Unknown) => true,
            Err(_) => false,
        };
        if removed
            && node
                .chain()
                .block_at(b.height)
                .is_some_and(|x| x.hash() == h)
        {
            for tx in &b.transactions {
                let _ = node.state.chain_mut().invalidate(tx.id);
            }
        }
        removed
    }

    /// Honest reaction to two conflicting blocks of one turn.
    fn dispute(&mut self, i: usize, first: Hash32, second: Hash32) {
        if self.nodes[i].is_byzantine() {
            return;
        }
        let Some(b) = self.blocks.get(&first).cloned() else {
            return;
        };
        let Some(author) = self.author_index(&b.author) else {
            return;
        };
        if !self.disputes.insert((author, b.turn_index, b.prev_hash)) {
            return;
        }
        self.metrics.equivocations += 1;
        self.trace.push(
            self.now,
            &self.ids[i].label,
            "dispute",
            format!(
                "equivocation by {} turn={} {} {}",
                b.author.label,
                b.turn_index,
                first.short(),
                second.short()
            ),
        );
        for p in self.participants(i) {
            let node = &mut self.nodes[p];
            for h in [first, second] {
                node.disputed.insert(h);
                let _ = node.finality.set_disputed(&h, true);
            }
        }
        let mut txs: Vec<Hash32> = Vec::new();
        for h in [first, second] {
            if let Some(x) = self.blocks.get(&h) {
                txs.extend(x.transactions.iter().map(|t| t.id));
            }
        }
        let (outcome, parts) = self.network_vote(
            i,
            VoteQuestion::InvalidateBlockTxs(txs),
            Some((first, second)),
        );
        for p in parts {
            if outcome.passed {
                self.invalidate_block(p, first);
                self.invalidate_block(p, second);
            } else {
                let node = &mut self.nodes[p];
                for h in [first, second] {
                    node.disputed.remove(&h);
                    let _ = node.finality.set_disputed(&h, false);
                }
            }
        }
    }

    /// A vote-against node calls for invalidating the newest pending data
    /// block written by an honest node.
    fn attack_honest_block(&mut self, i: usize) {
        let target = self.nodes[i]
            .chain()
            .blocks()
            .iter()
            .rev()
            .filter(|b| b.kind == BlockKind::Data)
            .find(|b| {
                let h = b.hash();
                self.author_index(&b.author)
                    .is_some_and(|a| !self.nodes[a].is_byzantine())
                    && self.nodes[i].finality.status(&h) == Some(FinalityStatus::Pending)
            })
            .cloned();
        let Some(target) = target else { return };
        let h = target.hash();
        let txs = target.transactions.iter().map(|t| t.id).collect();
        let (outcome, parts) = self.network_vote(i, VoteQuestion::InvalidateBlockTxs(txs), None);
        if !outcome.passed {
            return;
        }
        let mut hit = false;
        for p in parts {
            let removed = self.invalidate_block(p, h);
            hit |= removed && !self.nodes[p].is_byzantine();
        }
        if hit {
            self.metrics.forced_invalidations += 1;
            self.trace.push(
                self.now,
                &self.ids[i].label,
                "forced-invalidation",
                format!("{} by {}", h.short(), target.author.label),
            );
        }
    }

    // ----- storage -------------------------------------------------------

    /// Compaction runs only while every node is up, connected, quiet and
    /// on the same tip.
    fn quiescent(&self) -> bool {
        self.groups.is_none()
            && (0..self.nodes.len()).all(|i| self.alive(i))
            && self
                .queue
                .values()
                .all(|e| matches!(e.payload, Payload::SyncRequest))
            && self
                .nodes
                .windows(2)
                .all(|w| w[0].chain().tip_hash() == w[1].chain().tip_hash())
    }

    fn maintain_storage(&mut self) {
        if !matches!(self.config.storage, StorageMode::Prune | StorageMode::Meta) {
            return;
        }
        let tip = self.nodes[0].chain().tip_hash();
        if self.maintained == Some(tip) || !self.quiescent() {
            return;
        }
        self.maintained = Some(tip);
        if self.config.storage == StorageMode::Prune {
            self.run_prune();
        } else {
            self.run_meta_cut();
        }
    }

    fn run_prune(&mut self) {
        let cap = self.config.prune_cap;
        let chain = self.nodes[0].chain().clone();
        if untidy_size(&chain) <= cap {
            return;
        }
        let Some(gcn_id) = designated_gcn(&chain, cap) else {
            return;
        };
        let Some(g) = self.author_index(&gcn_id) else {
            return;
        };
        let mut final_height = chain.fixed_upto();
        for b in chain.untidy_blocks() {
            if b.kind == BlockKind::Data
                && self.nodes[g].finality.status(&b.hash()) == Some(FinalityStatus::Pending)
            {
                break;
            }
            final_height = b.height;
        }
        let (pruned, proof) = match prune(&chain, &self.nodes[g].key, &gcn_id, final_height) {
            Ok(x) => x,
            Err(e) => {
                self.trace
                    .push(self.now, &gcn_id.label, "prune-failed", e.to_string());
                return;
            }
        };
        for j in 0..self.nodes.len() {
            let own = self.nodes[j].chain().clone();
            if verify_prune(&own, &pruned, &proof, final_height).is_ok() {
                *self.nodes[j].state.chain_mut() = pruned.clone();
                for b in pruned.untidy_blocks().iter().chain(pruned.blocks().iter()) {
                    self.verified.insert(b.hash(), true);
                    self.blocks.entry(b.hash()).or_insert_with(|| b.clone());
                }
            } else {
                self.trace
                    .push(self.now, &self.ids[j].label, "prune-rejected", "");
            }
        }
        self.metrics.prunes += 1;
        self.trace.push(
            self.now,
            &gcn_id.label,
            "prune",
            format!(
                "bytes {} -> {} deleted={}",
                chain.total_size(),
                pruned.total_size(),
                proof.deleted.len()
            ),
        );
    }

    fn run_meta_cut(&mut self) {
        let chain = self.nodes[0].chain().clone();
        let n = self.nodes.len() as u64;
        let tail = self.config.meta_tail;
        if (chain.len() as u64) < 3 * n + tail {
            return;
        }
        let view = RevealView::from_chain(&chain);
        let mut need = 0u64;
        let mut cut = None;
        for b in chain.blocks() {
            for tx in &b.transactions {
                if tx.kind.is_commitment() {
                    need = need.max(view.revealed_at(&tx.id).unwrap_or(u64::MAX));
                }
            }
            if b.height < chain.height()
                && need <= b.height
                && b.height >= chain.base_height() + tail + n
            {
                cut = Some(b.height);
            }
        }
        let Some(cut) = cut else {
            if !self.draining {
                self.draining = true;
                self.trace.push(self.now, "sim", "drain", "");
            }
            return;
        };
        self.draining = false;
        let lt = self.local_time(0);
        let author_id = self.nodes[0].state.timeline().slot_at(lt).leader.clone();
        let a = self.author_index(&author_id).expect("roster member");
        let (outcome, _) = self.network_vote(a, VoteQuestion::AcceptPrune, None);
        let key = self.nodes[a].key.clone();
        let cut_chain = match meta_state_cut::<KeyValueState>(&chain, cut, tail, &key, &outcome) {
            Ok(c) => c,
            Err(e) => {
                self.trace
                    .push(self.now, &author_id.label, "meta-failed", e.to_string());
                return;
            }
        };
        let meta = cut_chain.blocks()[0].clone();
        self.note_block(&meta);
        for j in 0..self.nodes.len() {
            let own = self.nodes[j].chain().clone();
            if verify_meta(&own, &cut_chain, cut) {
                *self.nodes[j].state.chain_mut() = cut_chain.clone();
            } else {
                self.trace
                    .push(self.now, &self.ids[j].label, "meta-rejected", "");
            }
        }
        self.metrics.meta_cuts += 1;
        self.trace.push(
            self.now,
            &author_id.label,
            "meta-cut",
            format!(
                "cut={cut} bytes {} -> {}",
                chain.total_size(),
                cut_chain.total_size()
            ),
        );
    }

    // ----- wrap-up -------------------------------------------------------

    fn finish(mut self) -> SimResult {
        self.metrics.conflicting_finals = self.conflicting_finals();
        for node in &self.nodes {
            self.metrics.storage.push(StorageSample {
                tick: self.now,
                node: node.label().to_string(),
                tx_count: node.chain().transactions().count() as u64,
                bytes: node.stored_bytes(),
            });
        }
        let summary = self.metrics.summary().replace('\n', " ");
        self.trace.push(self.now, "sim", "end", summary.trim_end());
        SimResult {
            config: self.config,
            trace: self.trace,
            metrics: self.metrics,
            nodes: self.nodes,
        }
    }

    /// Pairs of honest views that hold mutually exclusive final data:
    /// two blocks for one author turn slot, or two spends of one key.
    fn conflicting_finals(&self) -> u64 {
        type View = (
            BTreeMap<(usize, u64, u64), Hash32>,
            BTreeMap<String, Vec<u8>>,
        );
        let views: Vec<View> = self
            .nodes
            .iter()
            .filter(|n| !n.is_byzantine())
            .map(|n| {
                let mut slots = BTreeMap::new();
                let mut spends = BTreeMap::new();
                for h in n.finals.keys() {
                    if n.finality.status(h) != Some(FinalityStatus::EffectiveFinal) {
                        continue;
                    }
                    let Some(b) = self.blocks.get(h) else {
                        continue;
                    };
                    if let Some(a) = self.author_index(&b.author) {
                        slots.insert((a, b.turn_index, b.height), *h);
                    }
                    for tx in &b.transactions {
                        if let Some((k, body)) = spend_entry(tx) {
                            spends.insert(k.to_string(), body.to_vec());
                        }
                    }
                }
                (slots, spends)
            })
            .collect();
        let mut conflicts = 0;
        for a in 0..views.len() {
            for b in a..views.len() {
                for (k, h) in &views[a].0 {
                    if views[b].0.get(k).is_some_and(|o| o != h) {
                        conflicts += 1;
                    }
                }
                for (k, body) in &views[a].1 {
                    if views[b].1.get(k).is_some_and(|o| o != body) {
                        conflicts += 1;
                    }
                }
            }
        }
        conflicts
    }
}

/// A receiving node accepts a meta-state cut when the snapshot equals its
/// own replay up to the cut and the retained blocks are its own.
fn verify_meta(own: &Chain, cut_chain: &Chain, cut: u64) -> bool {
    let Some(meta) = cut_chain.blocks().first() else {
        return false;
    };
    let Some((c, snap)) = read_meta_block(meta) else {
        return false;
    };
    let Ok(replayed) = replay_to::<KeyValueState>(own, cut) else {
        return false;
    };
    if c != cut || KeyValueState::restore(snap) != Some(replayed) {
        return false;
    }
    let retained: Vec<&Block> = own
        .blocks()
        .iter()
        .filter(|b| b.height > meta.height)
        .collect();
    retained.len() + 1 == cut_chain.len()
        && retained
            .iter()
            .zip(&cut_chain.blocks()[1..])
            .all(|(a, b)| *a == b)
}
