//! A scripted turn-based space conquest game played over one turn-based
//! chain by three or more players.
//!
//! Planets sit on a grid and produce ships every round: a fixed amount
//! plus a variable share drawn from that round's joint randomization.
//! Fleet sends are salted game-hash commitments revealed on arrival, one
//! fleet is called back through a hidden follow-up, owners publish fogged
//! ship counts, players draw from private piles (case 2) and a jointly
//! shuffled shared deck (case 5), and every turn carries bloat cover.
//! At the end each player files a win claim against a replay of the
//! revealed history.
//!
//! Game state is a pure fold over fleet records, so the live game and the
//! replay of the chain use the same resolver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::chain::{
    make_transaction, sha256, sha256_parts, Chain, GenesisConfig, Hash32, NodeId, NodeKey,
    Transaction, TransactionKind,
};
use crate::consensus::{
    open_vote, Ballot, EarlyFinalizeMode, Fraction, Outcome, PotState, TurnSchedule, VoteQuestion,
};
use crate::contracts::{
    bloat, commit, draw, fog_report, mix64, resolve_dispute, shuffle_deck, verify_fog, Card,
    CommitMode, CommitOptions, Commitment, Committed, Contribution, DeckCommitment, DeckEscrow,
    DeckSecrets, Dispute, DisputeError, DisputeOutcome, DisputeReason, DisputeStrategy, DrawCase,
    DrawPolicy, DrawResult, FleetMove, FogPolicy, FollowUp, FollowUpBook, GameReplay, KnownPile,
    Pile, RandomizationSession, Recovery, RevealRegistry, RevealedData, SplitMix64, Verdict,
};
use crate::Tick;

const GRID: u64 = 6;
const TURN: Tick = 20;
const TRANSITION: Tick = 5;
const FOG: FogPolicy = FogPolicy { band: 30 };
const SHARED_DECK: u32 = 24;
const PRIVATE_PILE: u32 = 8;
const BLOATS_PER_TURN: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RftsError {
    #[error("the shared deck needs at least three players, got {0}")]
    TooFewPlayers(usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Planet {
    pub x: u64,
    pub y: u64,
    pub owner: Option<usize>,
    pub ships: u64,
    pub fixed: u64,
    /// Upper bound of the random production share.
    pub variable: u64,
}

/// One hidden fleet send as its owner committed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FleetRecord {
    pub owner: usize,
    pub from: usize,
    pub to: usize,
    pub ships: u64,
    /// Ships the owner states were on `from` before this round's sends.
    pub avail: u64,
    pub round: u64,
    pub distance: u64,
    /// Hidden callback round, set by a follow-up.
    pub callback: Option<u64>,
}

impl FleetRecord {
    pub fn fleet(&self) -> FleetMove {
        FleetMove {
            send_round: self.round,
            distance: self.distance,
        }
    }

    /// Round at whose end the fleet lands, and where.
    pub fn landing(&self) -> (u64, usize) {
        match self.callback {
            Some(c) => (self.fleet().return_round(c), self.from),
            None => (self.fleet().arrival(), self.to),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        format!(
            "fleet from={} to={} ships={} avail={} round={} dist={}",
            self.from, self.to, self.ships, self.avail, self.round, self.distance
        )
        .into_bytes()
    }

    pub fn decode(owner: usize, data: &[u8]) -> Option<Self> {
        let text = std::str::from_utf8(data).ok()?;
        let mut f = text.strip_prefix("fleet ")?.split(' ');
        let mut field = |name: &str| -> Option<u64> {
            f.next()?
                .strip_prefix(name)?
                .strip_prefix('=')?
                .parse()
                .ok()
        };
        Some(FleetRecord {
            owner,
            from: field("from")? as usize,
            to: field("to")? as usize,
            ships: field("ships")?,
            avail: field("avail")?,
            round: field("round")?,
            distance: field("dist")?,
            callback: None,
        })
    }
}

fn callback_record(base: &Hash32, round: u64) -> Vec<u8> {
    format!("callback base={} round={round}", base.to_hex()).into_bytes()
}

fn parse_callback(data: &[u8]) -> Option<(Hash32, u64)> {
    let text = std::str::from_utf8(data).ok()?;
    let rest = text.strip_prefix("callback base=")?;
    let (base, round) = rest.split_once(" round=")?;
    Some((base.parse().ok()?, round.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RftsState {
    pub round: u64,
    pub planets: Vec<Planet>,
    /// Fleets sent and not yet landed, keyed by their commitment.
    pub fleets: BTreeMap<Hash32, FleetRecord>,
    pub produced: u64,
    pub destroyed: u64,
    pub initial_ships: u64,
}

impl RftsState {
    /// Deterministic board for `players` from `seed`.
    pub fn setup(players: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_b0a2d);
        let mut cells: Vec<(u64, u64)> = (0..GRID * GRID).map(|c| (c % GRID, c / GRID)).collect();
        cells.shuffle(&mut rng);
        let mut planets = Vec::new();
        for (i, &(x, y)) in cells.iter().take(players * 4).enumerate() {
            let home = i < players;
            planets.push(Planet {
                x,
                y,
                owner: home.then_some(i),
                ships: if home { 20 } else { rng.gen_range(4..=10) },
                fixed: if home { 3 } else { rng.gen_range(1..=2) },
                variable: 3,
            });
        }
        let initial_ships = planets.iter().map(|p| p.ships).sum();
        RftsState {
            round: 0,
            planets,
            fleets: BTreeMap::new(),
            produced: 0,
            destroyed: 0,
            initial_ships,
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> u64 {
        let (p, q) = (&self.planets[a], &self.planets[b]);
        (p.x.abs_diff(q.x) + p.y.abs_diff(q.y)).max(1)
    }

    pub fn ships_total(&self) -> u64 {
        self.planets.iter().map(|p| p.ships).sum::<u64>()
            + self.fleets.values().map(|f| f.ships).sum::<u64>()
    }

    /// Ships are only created by production and only removed by battles.
    pub fn conserved(&self) -> bool {
        self.ships_total() + self.destroyed == self.initial_ships + self.produced
    }

    pub fn planets_of(&self, player: usize) -> usize {
        self.planets
            .iter()
            .filter(|p| p.owner == Some(player))
            .count()
    }

    pub fn fleet_ships_of(&self, player: usize) -> u64 {
        self.fleets
            .values()
            .filter(|f| f.owner == player)
            .map(|f| f.ships)
            .sum()
    }

    /// Most planets, then most ships, then lowest index.
    pub fn leader(&self, players: usize) -> usize {
        (0..players)
            .max_by_key(|&p| {
                let ships: u64 = self
                    .planets
                    .iter()
                    .filter(|x| x.owner == Some(p))
                    .map(|x| x.ships)
                    .sum::<u64>()
                    + self.fleet_ships_of(p);
                (self.planets_of(p), ships, std::cmp::Reverse(p))
            })
            .expect("at least one player")
    }

    /// Ships leave their planet when sent.
    pub fn send(&mut self, id: Hash32, rec: FleetRecord) {
        let planet = &mut self.planets[rec.from];
        let taken = rec.ships.min(planet.ships);
        planet.ships -= taken;
        // anything above the planet's stock is minted out of nowhere
        self.produced += rec.ships - taken;
        self.fleets.insert(id, rec);
    }

    pub fn set_callback(&mut self, id: &Hash32, round: u64) {
        if let Some(f) = self.fleets.get_mut(id) {
            f.callback = Some(round);
        }
    }

    /// Production, then landings in commitment order. Attacker and
    /// defender lose the smaller force each; ties stay with the defender.
    pub fn end_round(&mut self, round: u64, random: u64) -> Vec<String> {
        let mut log = Vec::new();
        for (i, p) in self.planets.iter_mut().enumerate() {
            if p.owner.is_some() {
                let extra = SplitMix64::new(mix64(random ^ i as u64)).next_in(0, p.variable);
                p.ships += p.fixed + extra;
                self.produced += p.fixed + extra;
            }
        }
        let landing: Vec<Hash32> = self
            .fleets
            .iter()
            .filter(|(_, f)| f.landing().0 == round)
            .map(|(id, _)| *id)
            .collect();
        for id in landing {
            let f = self.fleets.remove(&id).expect("listed");
            let (_, at) = f.landing();
            let planet = &mut self.planets[at];
            if planet.owner == Some(f.owner) {
                planet.ships += f.ships;
                log.push(format!("reinforce p{at} by n{} +{}", f.owner, f.ships));
                continue;
            }
            let lost = f.ships.min(planet.ships);
            self.destroyed += 2 * lost;
            if f.ships > planet.ships {
                planet.owner = Some(f.owner);
                planet.ships = f.ships - lost;
                log.push(format!(
                    "capture p{at} by n{} left={}",
                    f.owner, planet.ships
                ));
            } else {
                planet.ships -= lost;
                log.push(format!(
                    "repelled n{} at p{at} left={}",
                    f.owner, planet.ships
                ));
            }
        }
        self.round = round + 1;
        log
    }
}

/// Fold a record log into state: each round applies its sends and
/// callbacks, then ends with that round's random value.
pub fn resolve(
    players: usize,
    seed: u64,
    randoms: &[u64],
    records: &[(Hash32, FleetRecord)],
) -> RftsState {
    let mut s = RftsState::setup(players, seed);
    for (round, &random) in randoms.iter().enumerate() {
        for (id, rec) in records.iter().filter(|(_, r)| r.round == round as u64) {
            s.send(*id, rec.clone());
        }
        s.end_round(round as u64, random);
    }
    s
}

/// Scripted deviations from honest play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RftsConfig {
    pub players: usize,
    pub rounds: u64,
    pub seed: u64,
    /// Player that keeps one bloat commitment closed at the end.
    pub withhold: Option<usize>,
    /// Player that double-spends a fleet in the given round.
    pub cheat: Option<(usize, u64)>,
    /// Player that leaves for good in the given round, taking its deck
    /// secrets along.
    pub drop: Option<(usize, u64)>,
    /// Deck secrets were escrowed at shuffle time.
    pub escrow: bool,
}

impl RftsConfig {
    pub fn new(players: usize, rounds: u64, seed: u64) -> Self {
        RftsConfig {
            players,
            rounds,
            seed,
            withhold: None,
            cheat: None,
            drop: None,
            escrow: false,
        }
    }

    /// The reference script: one withholding player and one double spend.
    pub fn scripted(seed: u64) -> Self {
        RftsConfig {
            withhold: Some(1),
            cheat: Some((2, 6)),
            ..RftsConfig::new(3, 30, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawEvent {
    pub round: u64,
    pub player: usize,
    pub case: DrawCase,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleSpend {
    pub player: usize,
    pub detected_round: u64,
    pub vote: Outcome,
    pub invalidated: Vec<Hash32>,
    pub reset_turn: u64,
}

#[derive(Debug, Clone)]
pub struct GameTrace {
    pub text: String,
    pub players: Vec<NodeId>,
    pub chain: Chain,
    /// State as the omniscient simulator saw it.
    pub state: RftsState,
    /// State rebuilt from the revealed history on chain.
    pub replayed: RftsState,
    pub victor: usize,
    pub claims: Vec<Verdict>,
    pub double_spend: Option<DoubleSpend>,
    pub recovery: Option<Result<DisputeOutcome, DisputeError>>,
    pub callback: Option<FollowUp>,
    pub draws: Vec<DrawEvent>,
    pub fog_reports: usize,
    pub fog_rejected: usize,
    pub bloats: usize,
    pub sessions: usize,
    pub conserved: bool,
}

impl GameTrace {
    pub fn digest(&self) -> Hash32 {
        sha256(self.text.as_bytes())
    }

    pub fn granted(&self) -> Vec<usize> {
        self.claims
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v, Verdict::Granted))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Rebuilds the shared deck from escrow, if there is one.
struct DeckRecovery<'a> {
    escrow: Option<&'a DeckEscrow>,
}

impl Recovery for DeckRecovery<'_> {
    fn recover(&mut self, _: &Dispute) -> Result<(), String> {
        match self.escrow {
            Some(e) if !e.permutations.is_empty() => Ok(()),
            _ => Err("reverse shuffle order and layer keys left with the player".into()),
        }
    }
}

/// Checks a claimant's disclosed moves and that the public replay ranks
/// the claimant first.
pub struct RftsReplay {
    pub claimant: usize,
    pub leader: usize,
}

impl GameReplay for RftsReplay {
    fn replay(&self, revealed: &[RevealedData]) -> Result<(), String> {
        for r in revealed.iter().filter(|r| !r.bloat) {
            let known = FleetRecord::decode(self.claimant, &r.data).is_some()
                || parse_callback(&r.data).is_some()
                || r.data.starts_with(b"DRAW");
            if !known {
                return Err(format!("unreadable move {}", r.commitment.short()));
            }
        }
        if self.claimant != self.leader {
            return Err(format!("replay ranks n{} first", self.leader));
        }
        Ok(())
    }
}

/// Everything the chain discloses once all reveals are in.
pub struct PublicReplay {
    pub randoms: Vec<u64>,
    pub records: Vec<(Hash32, FleetRecord)>,
    pub state: RftsState,
}

/// Rebuild the game from the chain: random values from the round
/// payloads, fleets and callbacks from valid reveals.
pub fn replay_chain(chain: &Chain, players: &[NodeId], seed: u64) -> PublicReplay {
    let index: BTreeMap<&NodeId, usize> = players.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut registry = RevealRegistry::new();
    let mut randoms = Vec::new();
    let mut order = Vec::new();
    let mut found: BTreeMap<Hash32, FleetRecord> = BTreeMap::new();
    let mut callbacks = Vec::new();
    for (_, tx) in chain.transactions() {
        if chain.is_invalidated(&tx.id) {
            continue;
        }
        if tx.kind.is_commitment() {
            if let Some(c) = Commitment::from_tx(tx, 0, u64::MAX / 2) {
                order.push(c.id);
                registry.register(c);
            }
        } else if tx.kind.is_reveal() {
            let Ok(r) = registry.reveal_tx(tx, 0) else {
                continue;
            };
            let Some(&owner) = index.get(&r.owner) else {
                continue;
            };
            if let Some(rec) = FleetRecord::decode(owner, &r.data) {
                found.insert(r.commitment, rec);
            } else if let Some(cb) = parse_callback(&r.data) {
                callbacks.push(cb);
            }
        } else if tx.kind == TransactionKind::Payload {
            if let Some(v) = std::str::from_utf8(&tx.body)
                .ok()
                .and_then(|s| s.strip_prefix("random "))
                .and_then(|s| s.split_once(" value="))
                .and_then(|(_, v)| v.parse().ok())
            {
                randoms.push(v);
            }
        }
    }
    for (base, round) in callbacks {
        if let Some(f) = found.get_mut(&base) {
            f.callback = Some(round);
        }
    }
    let records: Vec<(Hash32, FleetRecord)> = order
        .iter()
        .filter_map(|id| found.get(id).map(|r| (*id, r.clone())))
        .collect();
    let state = resolve(players.len(), seed, &randoms, &records);
    PublicReplay {
        randoms,
        records,
        state,
    }
}

struct Player {
    key: NodeKey,
    rng: ChaCha20Rng,
    pile: KnownPile,
    /// Commitments to open on this player's next turn.
    open_next: Vec<Committed>,
    /// Fleet commitments by landing round.
    in_flight: BTreeMap<Hash32, Committed>,
    callback_deltas: BTreeMap<Hash32, Committed>,
    active: bool,
}

struct Game {
    cfg: RftsConfig,
    ids: Vec<NodeId>,
    players: Vec<Player>,
    pot: PotState,
    state: RftsState,
    randoms: Vec<u64>,
    log: Vec<(Hash32, FleetRecord)>,
    text: String,
    deck: DeckCommitment,
    secrets: DeckSecrets,
    escrow: Option<DeckEscrow>,
    deck_broken: bool,
    book: FollowUpBook,
    callback: Option<FollowUp>,
    draws: Vec<DrawEvent>,
    double_spend: Option<DoubleSpend>,
    recovery: Option<Result<DisputeOutcome, DisputeError>>,
    fog_reports: usize,
    fog_rejected: usize,
    bloats: usize,
    sessions: usize,
    /// Per-round output of the joint randomization.
    round_random: u64,
}

pub fn rfts_scenario(players: usize, rounds: u64, seed: u64) -> Result<GameTrace, RftsError> {
    run_rfts(&RftsConfig::new(players, rounds, seed))
}

pub fn run_rfts(cfg: &RftsConfig) -> Result<GameTrace, RftsError> {
    if cfg.players < 3 {
        return Err(RftsError::TooFewPlayers(cfg.players));
    }
    for p in [cfg.withhold, cfg.cheat.map(|c| c.0), cfg.drop.map(|d| d.0)]
        .into_iter()
        .flatten()
    {
        if p >= cfg.players {
            return Err(RftsError::Invalid(format!(
                "player n{p} is not in the game"
            )));
        }
    }
    let mut game = Game::new(cfg);
    for round in 0..cfg.rounds {
        game.play_round(round);
    }
    Ok(game.finish())
}

impl Game {
    fn new(cfg: &RftsConfig) -> Self {
        let keys: Vec<NodeKey> = (0..cfg.players)
            .map(|i| {
                NodeKey::from_seed(
                    format!("n{i}"),
                    sha256_parts(&[
                        b"rfts-key",
                        &cfg.seed.to_le_bytes(),
                        &(i as u64).to_le_bytes(),
                    ])
                    .0,
                )
            })
            .collect();
        let ids: Vec<NodeId> = keys.iter().map(|k| k.id().clone()).collect();
        let genesis = GenesisConfig {
            network_id: "rfts".into(),
            turn_duration: TURN,
            transition_duration: TRANSITION,
            roster: ids.clone(),
        };
        let schedule = TurnSchedule::new(ids.clone(), TURN, TRANSITION)
            .expect("fixed durations are valid")
            .with_mode(EarlyFinalizeMode::WaitRegularSlot);
        let mut shared_rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0xdec0);
        let source: Vec<Card> = (0..SHARED_DECK).collect();
        let (deck, secrets) =
            shuffle_deck(&ids, &source, &mut shared_rng).expect("three or more parties");
        let escrow = cfg.escrow.then(|| secrets.escrow());
        let players = keys
            .into_iter()
            .enumerate()
            .map(|(i, key)| {
                let mut rng = ChaCha20Rng::from_seed(
                    sha256_parts(&[
                        b"rfts-rng",
                        &cfg.seed.to_le_bytes(),
                        &(i as u64).to_le_bytes(),
                    ])
                    .0,
                );
                let mut cards: Vec<Card> = (0..PRIVATE_PILE)
                    .map(|c| 100 * (i as u32 + 1) + c)
                    .collect();
                cards.shuffle(&mut rng);
                Player {
                    key,
                    rng,
                    pile: KnownPile::new(cards),
                    open_next: Vec::new(),
                    in_flight: BTreeMap::new(),
                    callback_deltas: BTreeMap::new(),
                    active: true,
                }
            })
            .collect();
        let mut text = String::new();
        let _ = writeln!(
            text,
            "game players={} rounds={} seed={} deck={}",
            cfg.players,
            cfg.rounds,
            cfg.seed,
            deck.digest().short()
        );
        Game {
            cfg: cfg.clone(),
            pot: PotState::new(schedule, genesis.chain()),
            state: RftsState::setup(cfg.players, cfg.seed),
            ids,
            players,
            randoms: Vec::new(),
            log: Vec::new(),
            text,
            deck,
            secrets,
            escrow,
            deck_broken: false,
            book: FollowUpBook::new(),
            callback: None,
            draws: Vec::new(),
            double_spend: None,
            recovery: None,
            fog_reports: 0,
            fog_rejected: 0,
            bloats: 0,
            sessions: 0,
            round_random: 0,
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn n(&self) -> usize {
        self.players.len()
    }

    fn opts(&self, round: u64) -> CommitOptions {
        CommitOptions {
            salted: true,
            created_turn: round,
            reveal_deadline: self.cfg.rounds + 1,
            pad_to: Some(128),
        }
    }

    fn play_round(&mut self, round: u64) {
        if let Some((p, at)) = self.cfg.drop {
            if at == round && self.players[p].active {
                self.players[p].active = false;
                self.deck_broken = true;
                // hidden fleets of a vanished player never land
                let gone: Vec<Hash32> = self.players[p].in_flight.keys().copied().collect();
                for id in gone {
                    if let Some(f) = self.state.fleets.remove(&id) {
                        self.state.destroyed += f.ships;
                    }
                    self.log.retain(|(x, _)| *x != id);
                }
                self.line(format!("round {round} drop n{p}"));
            }
        }
        self.randomize(round);
        for p in 0..self.n() {
            let turn = round * self.n() as u64 + p as u64;
            if self.players[p].active {
                self.take_turn(round, p, turn);
            } else {
                self.line(format!("round {round} turn {turn} n{p} absent"));
            }
        }
        let events = self.state.end_round(round, self.round_random);
        self.randoms.push(self.round_random);
        for e in events {
            self.line(format!("round {round} {e}"));
        }
        debug_assert!(
            self.state.conserved(),
            "ship conservation broken in round {round}"
        );
    }

    /// Joint commit-reveal among active players; the output seeds
    /// production, draws and fog for the round.
    fn randomize(&mut self, round: u64) {
        let turn = round * self.n() as u64;
        let start = self.pot.timeline().slot(turn).start;
        let initiator = (0..self.n())
            .find(|&p| self.players[p].active)
            .expect("someone is still playing");
        let mut session =
            RandomizationSession::new(self.ids[initiator].clone(), 0, 999_999, start + TRANSITION);
        let mut contributions = Vec::new();
        let active: Vec<usize> = (0..self.n()).filter(|&p| self.players[p].active).collect();
        for p in active {
            let player = &mut self.players[p];
            let value = player.rng.gen_range(0..1_000_000u64);
            let c = Contribution::new(value, &mut player.rng);
            session
                .commit(&self.ids[p], c.digest(), start)
                .expect("one commit each inside the window");
            contributions.push((p, c));
        }
        for (p, c) in &contributions {
            session
                .reveal(&self.ids[*p], c.value, &c.salt, start + 1)
                .expect("reveal matches its commit");
        }
        let out = session.run(start + 1).expect("all revealed");
        self.round_random = out.value;
        self.sessions += 1;
        self.line(format!(
            "round {round} random value={} contributors={}",
            out.value,
            out.contributors.len()
        ));
    }

    fn take_turn(&mut self, round: u64, p: usize, turn: u64) {
        let slot = self.pot.timeline().slot(turn).clone();
        let opts = self.opts(round);
        let mut txs: Vec<Transaction> = Vec::new();
        if p == (0..self.n()).find(|&q| self.players[q].active).unwrap_or(0) {
            txs.push(self.payload(
                p,
                format!("random round={round} value={}", self.round_random),
            ));
        }
        // reveals due now: last turn's cover and draws, fleets landing this round
        let landing: Vec<Hash32> = self.players[p]
            .in_flight
            .keys()
            .filter(|id| {
                self.state
                    .fleets
                    .get(*id)
                    .is_some_and(|f| f.landing().0 == round)
            })
            .copied()
            .collect();
        let mut due: Vec<Committed> = std::mem::take(&mut self.players[p].open_next);
        for id in &landing {
            if let Some(c) = self.players[p].callback_deltas.remove(id) {
                due.push(c);
            }
            due.push(self.players[p].in_flight.remove(id).expect("listed"));
        }
        for c in &due {
            let player = &mut self.players[p];
            txs.push(
                c.reveal_tx(&player.key, &mut player.rng)
                    .expect("reveal fits"),
            );
        }
        for id in &landing {
            if let Some(f) = self.state.fleets.get(id) {
                self.line(format!(
                    "round {round} n{p} reveal fleet p{}->p{} ships={} {}",
                    f.from,
                    f.landing().1,
                    f.ships,
                    id.short()
                ));
            }
        }
        self.check_double_spend(round, p, turn, &landing);
        self.fog(round, p, &mut txs);
        self.send_fleets(round, p, &mut txs, opts);
        self.draw_cards(round, p, &mut txs, opts);
        for _ in 0..BLOATS_PER_TURN {
            let player = &mut self.players[p];
            let b = bloat(&player.key, 24, opts, &mut player.rng).expect("bloat fits");
            txs.push(b.tx.clone());
            player.open_next.push(b);
            self.bloats += 1;
        }
        let key = self.players[p].key.clone();
        let block = self
            .pot
            .propose_block(&key, txs, slot.start)
            .expect("leader writes at the start of its turn");
        self.line(format!(
            "round {round} turn {turn} n{p} block h={} txs={} {}",
            block.height,
            block.transactions.len(),
            block.hash().short()
        ));
        let succ = (p + 1) % self.n();
        let seal_at = slot.nominal_end - 1;
        let sealed = if self.players[succ].active && succ != p {
            let co = self.players[succ].key.clone();
            self.pot.handover(&key, &self.ids[succ], Some(&co), seal_at)
        } else {
            self.pot.finalize_turn(&key, seal_at)
        };
        let sealed = sealed.expect("seal inside the turn");
        self.line(format!("round {round} turn {turn} n{p} {:?}", sealed.kind));
    }

    fn payload(&mut self, p: usize, body: String) -> Transaction {
        let player = &mut self.players[p];
        make_transaction(
            &player.key,
            TransactionKind::Payload,
            body.into_bytes(),
            None,
            &mut player.rng,
        )
        .expect("unpadded")
    }

    /// Rules: only owners report, values stay within the band, the
    /// deviation comes from the round's random value, and the others
    /// check each report.
    fn fog(&mut self, round: u64, p: usize, txs: &mut Vec<Transaction>) {
        let owned: Vec<(usize, u64)> = self
            .state
            .planets
            .iter()
            .enumerate()
            .filter(|(_, x)| x.owner == Some(p))
            .map(|(i, x)| (i, x.ships))
            .collect();
        for (i, ships) in owned {
            let random = mix64(self.round_random ^ ((i as u64) << 8) ^ p as u64);
            let report = fog_report(ships, &FOG, random);
            let player = &mut self.players[p];
            txs.push(
                make_transaction(
                    &player.key,
                    TransactionKind::FogReport,
                    format!(
                        "fog round={round} planet={i} published={}",
                        report.published
                    )
                    .into_bytes(),
                    None,
                    &mut player.rng,
                )
                .expect("unpadded"),
            );
            self.fog_reports += 1;
            if verify_fog(&self.ids[p], ships, &FOG, random, report.published).is_err() {
                self.fog_rejected += 1;
            }
        }
    }

    fn send_fleets(
        &mut self,
        round: u64,
        p: usize,
        txs: &mut Vec<Transaction>,
        opts: CommitOptions,
    ) {
        let cheating = self.cfg.cheat == Some((p, round));
        let sources: Vec<usize> = (0..self.state.planets.len())
            .filter(|&i| self.state.planets[i].owner == Some(p) && self.state.planets[i].ships >= 6)
            .collect();
        for from in sources {
            let avail = self.state.planets[from].ships;
            let target = (0..self.state.planets.len())
                .filter(|&j| self.state.planets[j].owner != Some(p))
                .min_by_key(|&j| (self.state.distance(from, j), self.state.planets[j].ships, j));
            let Some(to) = target else { continue };
            let distance = self.state.distance(from, to);
            let copies = if cheating { 2 } else { 1 };
            let ships = if cheating { avail } else { avail * 3 / 4 };
            for _ in 0..copies {
                let rec = FleetRecord {
                    owner: p,
                    from,
                    to,
                    ships,
                    avail,
                    round,
                    distance,
                    callback: None,
                };
                let player = &mut self.players[p];
                let c = commit(
                    &player.key,
                    &rec.encode(),
                    CommitMode::GameHash,
                    opts,
                    &mut player.rng,
                )
                .expect("record fits");
                let id = c.tx.id;
                txs.push(c.tx.clone());
                player.in_flight.insert(id, c);
                self.state.send(id, rec.clone());
                self.log.push((id, rec));
                self.line(format!("round {round} n{p} hidden send {}", id.short()));
            }
            if cheating {
                self.line(format!("round {round} n{p} double-spends p{from}"));
                break;
            }
            self.maybe_callback(round, p, from, to, opts, txs);
        }
    }

    /// The first send that is at least two rounds long turns around one
    /// round after leaving.
    fn maybe_callback(
        &mut self,
        round: u64,
        p: usize,
        _from: usize,
        _to: usize,
        opts: CommitOptions,
        txs: &mut Vec<Transaction>,
    ) {
        if self.callback.is_some() {
            return;
        }
        let Some((id, rec)) = self.log.last().cloned() else {
            return;
        };
        if rec.distance < 2 || rec.round + 2 >= self.cfg.rounds {
            return;
        }
        let at = round + 1;
        let player = &mut self.players[p];
        let delta = commit(
            &player.key,
            &callback_record(&id, at),
            CommitMode::GameHash,
            opts,
            &mut player.rng,
        )
        .expect("record fits");
        let follow = FollowUp {
            base: id,
            delta: delta.commitment.clone(),
            fleet: rec.fleet(),
            callback: at,
            return_to_origin: true,
        };
        let follow = self
            .book
            .follow_up(follow)
            .expect("callback inside the open range")
            .clone();
        txs.push(delta.tx.clone());
        player.callback_deltas.insert(id, delta);
        self.state.set_callback(&id, at);
        if let Some(entry) = self.log.iter_mut().find(|(x, _)| *x == id) {
            entry.1.callback = Some(at);
        }
        self.line(format!(
            "round {round} n{p} follow-up {} returns round {}",
            id.short(),
            rec.fleet().return_round(at)
        ));
        self.callback = Some(follow);
    }

    fn draw_cards(
        &mut self,
        round: u64,
        p: usize,
        txs: &mut Vec<Transaction>,
        opts: CommitOptions,
    ) {
        let n = self.n() as u64;
        if round % 6 == 1 {
            let seed = mix64(self.round_random ^ p as u64);
            let policy = DrawPolicy {
                fake_sessions: 0,
                commit: opts,
            };
            let player = &mut self.players[p];
            if let Ok(DrawResult::Private {
                index, committed, ..
            }) = draw(
                DrawCase::PrivatePrivate,
                Pile::Known(&mut player.pile),
                &player.key,
                seed,
                &policy,
                &mut player.rng,
            ) {
                txs.push(committed.tx.clone());
                player.open_next.push(committed);
                self.draws.push(DrawEvent {
                    round,
                    player: p,
                    case: DrawCase::PrivatePrivate,
                    index,
                });
                self.line(format!("round {round} n{p} draw case=2 private"));
            }
        }
        if round % 6 == 3 && (round / 6) % n == p as u64 {
            if self.deck_broken {
                self.recover_deck(round, p);
                return;
            }
            let policy = DrawPolicy::default();
            let player = &mut self.players[p];
            let result = draw(
                DrawCase::PublicPrivate,
                Pile::Deck {
                    deck: &mut self.deck,
                    secrets: &self.secrets,
                },
                &player.key,
                self.round_random,
                &policy,
                &mut player.rng,
            );
            if let Ok(DrawResult::Claimed { index, .. }) = result {
                txs.push(
                    make_transaction(
                        &player.key,
                        TransactionKind::DrawClaim,
                        format!("draw round={round} index={index}").into_bytes(),
                        None,
                        &mut player.rng,
                    )
                    .expect("unpadded"),
                );
                self.draws.push(DrawEvent {
                    round,
                    player: p,
                    case: DrawCase::PublicPrivate,
                    index,
                });
                self.line(format!("round {round} n{p} draw case=5 index={index}"));
            }
        }
    }

    fn recover_deck(&mut self, round: u64, p: usize) {
        if self.recovery.is_some() {
            return;
        }
        let (gone, _) = self.cfg.drop.expect("deck breaks only on a drop");
        let dispute = Dispute::open(
            self.ids[gone].clone(),
            DisputeReason::InvalidClaim {
                index: self.deck.card_count - self.deck.remaining(),
            },
            round,
        );
        let mut hook = DeckRecovery {
            escrow: self.escrow.as_ref(),
        };
        let involved: Vec<NodeId> = vec![self.ids[p].clone()];
        let result = resolve_dispute(&dispute, &involved, DisputeStrategy::Recover(&mut hook));
        match &result {
            Ok(o) => self.line(format!("round {round} n{p} deck dispute {o:?}")),
            Err(e) => self.line(format!("round {round} n{p} deck dispute failed: {e}")),
        }
        self.recovery = Some(result);
    }

    /// A revealed fleet claims more ships than its stated stock, or two
    /// sends from one planet in one round state the same stock but sum
    /// above it: the others call an invalidation vote.
    fn check_double_spend(&mut self, round: u64, p: usize, turn: u64, landing: &[Hash32]) {
        let revealed: Vec<(Hash32, FleetRecord)> = self
            .log
            .iter()
            .filter(|(id, _)| landing.contains(id))
            .cloned()
            .collect();
        let mut groups: BTreeMap<(usize, u64), Vec<(Hash32, FleetRecord)>> = BTreeMap::new();
        for (id, r) in revealed {
            groups.entry((r.from, r.round)).or_default().push((id, r));
        }
        for ((from, sent), group) in groups {
            let avail = group.iter().map(|(_, r)| r.avail).max().unwrap_or(0);
            let total: u64 = group.iter().map(|(_, r)| r.ships).sum();
            if total <= avail {
                continue;
            }
            let ids: Vec<Hash32> = group.iter().map(|(id, _)| *id).collect();
            let mut txs = ids.clone();
            for (_, tx) in self.pot.chain().transactions() {
                if let Some((target, _)) = crate::contracts::RevealSecret::from_tx(tx) {
                    if ids.contains(&target) {
                        txs.push(tx.id);
                    }
                }
            }
            let caller = (p + 1) % self.n();
            let active: BTreeSet<NodeId> = (0..self.n())
                .filter(|&q| self.players[q].active)
                .map(|q| self.ids[q].clone())
                .collect();
            let now = self.pot.timeline().slot(turn).start;
            let call = sha256_parts(&[b"double-spend", &from.to_le_bytes(), &sent.to_le_bytes()]);
            let mut vote = open_vote(
                call,
                VoteQuestion::InvalidateBlockTxs(txs.clone()),
                now,
                now + TRANSITION,
                Fraction::new(1, 2),
            );
            for q in (0..self.n()).filter(|&q| self.players[q].active) {
                let ballot = if q == p { Ballot::No } else { Ballot::Yes };
                vote.cast_ballot(&self.ids[q], ballot, now)
                    .expect("one ballot each");
            }
            let outcome = vote
                .tally(&active, now + TRANSITION)
                .expect("deadline reached");
            self.line(format!(
                "round {round} n{caller} calls invalidation of n{p} double spend p{from}@{sent} yes={} no={} passed={}",
                outcome.yes, outcome.no, outcome.passed
            ));
            if !outcome.passed {
                continue;
            }
            // reveals are not on chain yet: only commitments are flagged here
            let mut flagged = Vec::new();
            for id in &txs {
                if self.pot.chain_mut().invalidate(*id).is_ok() {
                    flagged.push(*id);
                }
            }
            // reset: the cheating turn's sends never happened
            self.log.retain(|(id, _)| !ids.contains(id));
            for id in &ids {
                self.players[p].in_flight.remove(id);
            }
            let reset_turn = sent * self.n() as u64 + p as u64;
            self.rebuild(round);
            self.line(format!(
                "round {round} turn-reset turn={reset_turn} invalidated={}",
                flagged.len()
            ));
            self.double_spend = Some(DoubleSpend {
                player: p,
                detected_round: round,
                vote: outcome,
                invalidated: flagged,
                reset_turn,
            });
        }
    }

    /// Re-fold the log after records were struck, replaying this round's
    /// sends made so far.
    fn rebuild(&mut self, round: u64) {
        let done: Vec<(Hash32, FleetRecord)> = self
            .log
            .iter()
            .filter(|(_, r)| r.round < round)
            .cloned()
            .collect();
        let mut s = resolve(self.n(), self.cfg.seed, &self.randoms, &done);
        for (id, r) in self.log.iter().filter(|(_, r)| r.round == round) {
            s.send(*id, r.clone());
        }
        // landed fleets of struck records could not have existed
        self.state = s;
    }

    fn finish(mut self) -> GameTrace {
        // full disclosure: every open commitment goes on chain in one last turn
        let turn = self.cfg.rounds * self.n() as u64;
        for p in 0..self.n() {
            if !self.players[p].active {
                continue;
            }
            let turn = turn + p as u64;
            let slot = self.pot.timeline().slot(turn).clone();
            let mut open: Vec<Committed> = std::mem::take(&mut self.players[p].open_next);
            open.extend(std::mem::take(&mut self.players[p].callback_deltas).into_values());
            open.extend(std::mem::take(&mut self.players[p].in_flight).into_values());
            if self.cfg.withhold == Some(p) {
                if let Some(pos) = open.iter().rposition(|c| {
                    matches!(
                        c.commitment.payload,
                        crate::contracts::CommitPayload::Encrypted { .. }
                    )
                }) {
                    let kept = open.remove(pos);
                    self.line(format!("end n{p} withholds {}", kept.tx.id.short()));
                }
            }
            let player = &mut self.players[p];
            let txs: Vec<Transaction> = open
                .iter()
                .map(|c| {
                    c.reveal_tx(&player.key, &mut player.rng)
                        .expect("reveal fits")
                })
                .collect();
            let key = player.key.clone();
            let count = txs.len();
            if count > 0 {
                self.pot
                    .propose_block(&key, txs, slot.start)
                    .expect("closing turn");
            }
            self.pot
                .finalize_turn(&key, slot.nominal_end - 1)
                .expect("closing seal");
            self.line(format!("end n{p} discloses {count}"));
        }
        let public = replay_chain(self.pot.chain(), &self.ids, self.cfg.seed);
        let leader = public.state.leader(self.n());
        let final_turn = turn + self.n() as u64;
        let claims: Vec<Verdict> = (0..self.n())
            .map(|p| {
                let replay = RftsReplay {
                    claimant: p,
                    leader,
                };
                crate::contracts::win_claim(&self.ids[p], self.pot.chain(), &replay, final_turn)
            })
            .collect();
        for (p, v) in claims.iter().enumerate() {
            let verdict = match v {
                Verdict::Granted => "granted".to_string(),
                Verdict::Denied { reason, .. } => format!("denied {reason:?}"),
            };
            self.line(format!("claim n{p} {verdict}"));
        }
        let conserved = self.state.conserved();
        self.line(format!(
            "end victor=n{leader} planets={} height={} replay_matches={}",
            public.state.planets_of(leader),
            self.pot.chain().height(),
            public.state.planets == self.state.planets
        ));
        GameTrace {
            text: self.text,
            players: self.ids,
            chain: self.pot.chain().clone(),
            state: self.state,
            replayed: public.state,
            victor: leader,
            claims,
            double_spend: self.double_spend,
            recovery: self.recovery,
            callback: self.callback,
            draws: self.draws,
            fog_reports: self.fog_reports,
            fog_rejected: self.fog_rejected,
            bloats: self.bloats,
            sessions: self.sessions,
            conserved,
        }
    }
}
