//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false` so the lines always print.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use pot_core::chain::{make_transaction, Block, BlockKind, Hash32, NodeKey, TransactionKind};
use pot_core::config::SimConfig;
use pot_core::consensus::{resolve_fork, Branch, ForkPolicy, Fraction, Resolution, TieBreak};
use pot_core::contracts::{
    brute_force_resilience, fraud_resilience, shuffle_deck, Card, Contribution, DenyReason,
    Grouping, RandomizationSession, Verdict,
};
use pot_core::peering::{drains, pull_interval, push_round, PushTree};
use pot_core::sim::rfts::{run_rfts, RftsConfig};
use pot_core::sim::{parse_scenario, run, Behavior, FaultEvent, FaultKind};
use pot_core::storage::{
    breakeven, child_slots, classify, storage_at, storage_series, MetaPlan, RevealView, SeriesMode,
    SeriesScenario, StorageParams,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)*));
        }
    }};
}

fn keys(n: usize) -> Vec<NodeKey> {
    (0..n)
        .map(|i| NodeKey::from_seed(format!("n{i}"), [i as u8 + 1; 32]))
        .collect()
}

fn c1_pull_intervals() -> Check {
    for (x, want) in [(-9, 30), (-25, 120), (0, 12)] {
        let got = pull_interval(x, 60);
        ensure!(
            got == Fraction::from_integer(want),
            "x={x}: {got} != {want}"
        );
    }
    Ok("30/120/12 at t=60".into())
}

fn c2_push_tree() -> Check {
    ensure!(
        drains(2, 1000) == (20..=29).collect::<Vec<_>>(),
        "drains(2)"
    );
    ensure!(
        drains(55, 1000) == (550..=559).collect::<Vec<_>>(),
        "drains(55)"
    );
    for n in [50usize, 200, 1000] {
        let online: BTreeSet<usize> = (1..n).collect();
        let r = push_round(&PushTree::new(n), &online, 0);
        ensure!(
            r.unreached().is_empty(),
            "n={n}: unreached {:?}",
            r.unreached()
        );
        ensure!(
            r.receipts.iter().all(|&c| c == 1),
            "n={n}: duplicate receipt"
        );
        let digits = (n - 1).to_string().len() as u32;
        ensure!(
            r.max_hops() == digits,
            "n={n}: max hops {} != {digits}",
            r.max_hops()
        );
    }
    Ok("n=50/200/1000 reached once, hops = digits".into())
}

fn c3_randomization() -> Check {
    let ks = keys(4);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let values = [412u64, 369, 741];
    let contribs: Vec<Contribution> = values
        .iter()
        .map(|&v| Contribution::new(v, &mut rng))
        .collect();
    let silent = Contribution::new(999, &mut rng);
    let mut orders = vec![vec![0usize, 1, 2]];
    for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        orders.push(perm.to_vec());
    }
    for order in &orders {
        let mut s = RandomizationSession::new(ks[0].id().clone(), 1, 1522, 10);
        for i in 0..3 {
            s.commit(ks[i].id(), contribs[i].digest(), 1)
                .map_err(|e| e.to_string())?;
        }
        s.commit(ks[3].id(), silent.digest(), 1)
            .map_err(|e| e.to_string())?;
        for &i in order {
            s.reveal(ks[i].id(), contribs[i].value, &contribs[i].salt, 4)
                .map_err(|e| e.to_string())?;
        }
        let out = s.run(11).map_err(|e| e.to_string())?;
        ensure!(out.seed == 1522, "order {order:?}: seed {}", out.seed);
        ensure!(out.value == 416, "order {order:?}: value {}", out.value);
        ensure!(
            out.excluded == vec![ks[3].id().clone()],
            "timeout not excluded"
        );
    }
    Ok("seed 1522 for all 6 reveal orders, output 416".into())
}

fn c4_shuffle_bft() -> Check {
    for n in 3..=12 {
        for g in [
            Grouping::FullMistrust,
            Grouping::GroupsOf(2),
            Grouping::GroupsOf(3),
        ] {
            let (a, b) = (fraud_resilience(g, n), brute_force_resilience(g, n));
            ensure!(a == b, "n={n} {g:?}: {a:?} vs brute force {b:?}");
        }
    }
    for n in [6, 12] {
        ensure!(
            fraud_resilience(Grouping::FullMistrust, n) == Some(Fraction::from_integer(1)),
            "delta at {n}"
        );
        ensure!(
            fraud_resilience(Grouping::GroupsOf(2), n) == Some(Fraction::new(1, 2)),
            "epsilon at {n}"
        );
        ensure!(
            fraud_resilience(Grouping::GroupsOf(3), n) == Some(Fraction::new(1, 3)),
            "theta at {n}"
        );
    }
    Ok("closed form = brute force for n<=12; 1, 1/2, 1/3".into())
}

fn c5_deck_roundtrip() -> Check {
    let source: Vec<Card> = (0..52).collect();
    let ids: Vec<_> = keys(4).iter().map(|k| k.id().clone()).collect();
    let mut failures = 0;
    for trial in 0..1000u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(trial);
        let parties = if trial % 2 == 0 { 3 } else { 4 };
        let (mut deck, secrets) =
            shuffle_deck(&ids[..parties], &source, &mut rng).map_err(|e| e.to_string())?;
        let mut cards: Vec<Card> = Vec::with_capacity(52);
        for i in 0..52 {
            match deck.draw(i, &secrets) {
                Ok(c) => cards.push(c.card),
                Err(_) => failures += 1,
            }
        }
        cards.sort_unstable();
        if cards != source {
            failures += 1;
        }
        // single-value claims: right ciphertext at the wrong index, or no ciphertext
        let i = rng.gen_range(0..52);
        let j = (i + rng.gen_range(1..52)) % 52;
        let top = secrets.layers.last().expect("layer");
        if top.release(j, &deck.published_pile[i]).is_ok() || top.release(i, &[]).is_ok() {
            failures += 1;
        }
        if secrets.a.release(i, &Hash32::ZERO).is_ok() {
            failures += 1;
        }
    }
    ensure!(failures == 0, "{failures} failures");
    Ok("1000 trials, 3 and 4 parties, 0 failures".into())
}

fn c6_storage() -> Check {
    let p = StorageParams::default();
    let s = SeriesScenario::new(p, 600_000, 100_000, 0);
    ensure!(
        storage_at(600_000, &s, SeriesMode::None) == Fraction::from_integer(600),
        "600k"
    );
    ensure!(
        storage_at(100_000, &s, SeriesMode::None) == Fraction::from_integer(100),
        "100k"
    );
    let k = child_slots(&p);
    let s = SeriesScenario::new(p, 200_000, 1, 3000);
    for n in (1..=200_000).step_by(97) {
        let a = storage_at(n, &s, SeriesMode::Prune { every: k });
        let b = storage_at(n, &s, SeriesMode::Child);
        let diff = if a > b { a - b } else { b - a };
        ensure!(diff <= p.size_relevant, "n={n}: prune {a} child {b}");
    }
    let plateau = Fraction::from_integer(5);
    let plan = MetaPlan {
        every: 10_000,
        plateau,
    };
    let s = SeriesScenario::new(p, 400_000, 1_000, 2_000);
    let hi = plateau + p.size_relevant * Fraction::from_integer(plan.every + 2_000);
    let late: Vec<_> = storage_series(&s, SeriesMode::Meta(plan))
        .into_iter()
        .filter(|pt| pt.tx_count >= 20_000)
        .collect();
    ensure!(
        late.iter().all(|pt| pt.mb >= plateau && pt.mb <= hi),
        "meta leaves the band"
    );
    let at_cut: BTreeSet<Fraction> = late
        .iter()
        .filter(|pt| pt.tx_count % plan.every == 0)
        .map(|pt| pt.mb)
        .collect();
    ensure!(at_cut.len() == 1, "meta level drifts: {at_cut:?}");
    Ok(format!(
        "600/100 MB, prune~child, meta level {}",
        at_cut.iter().next().unwrap()
    ))
}

fn c7_breakeven() -> Check {
    let p = StorageParams::default();
    let t = breakeven(Fraction::from_integer(1), &p)
        .map_err(|e| e.to_string())?
        .threshold;
    let mb = 1_048_576.0;
    let (l, s, h) = (0.01, 32.0 / mb, 32.0 / mb);
    let g = |f: f64| f * l - h - f * s;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let exact = *t.numer() as f64 / *t.denom() as f64;
    let rel = (exact - lo).abs() / lo;
    ensure!(rel < 1e-9, "relative error {rel}");
    Ok(format!("f* = {t}, bisection rel err {rel:.1e}"))
}

fn byzantine_run(seed: u64, k: usize) -> Result<(u64, u64), String> {
    let c = SimConfig {
        nodes: 10,
        rounds: 3,
        seed,
        theta: Fraction::new(1, 2),
        ..SimConfig::default()
    };
    let mut order: Vec<usize> = (0..10).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut ev = Vec::new();
    for &b in &order[..k] {
        for behavior in [Behavior::EquivocateSplit, Behavior::VoteNo] {
            ev.push(FaultEvent::new(
                0,
                FaultKind::Byzantine { node: b, behavior },
            ));
        }
    }
    let m = run(&c, &ev).map_err(|e| e.to_string())?.metrics;
    Ok((m.conflicting_finals, m.forced_invalidations))
}

fn c8_safety() -> Check {
    let mut conflicting = 0;
    for seed in 0..200 {
        conflicting += (byzantine_run(seed, 4)?.0 > 0) as u32;
    }
    ensure!(
        conflicting == 0,
        "{conflicting}/200 runs at weight 0.4 hold conflicting finals"
    );
    let mut forced = 0;
    for seed in 0..200 {
        forced += (byzantine_run(seed, 6)?.1 > 0) as u32;
    }
    ensure!(forced > 0, "no forced invalidation at weight 0.6");
    Ok(format!(
        "weight 0.4: 0/200 conflicting; weight 0.6: {forced}/200 forced invalidations"
    ))
}

fn branch(layout: &[(usize, u64)], anchor: Hash32, ks: &[NodeKey], salt: u64) -> Branch {
    let mut rng = ChaCha20Rng::seed_from_u64(salt);
    let mut prev = anchor;
    let mut out = Vec::new();
    for (i, &(author, turn)) in layout.iter().enumerate() {
        let k = &ks[author];
        let tx = make_transaction(
            k,
            TransactionKind::Payload,
            vec![i as u8, author as u8],
            None,
            &mut rng,
        )
        .expect("tx");
        let b = Block::new(
            i as u64 + 1,
            prev,
            k.id().clone(),
            turn,
            turn * 25 + i as u64,
            BlockKind::Data,
            vec![tx],
        )
        .signed(k);
        prev = b.hash();
        out.push(b);
    }
    Branch::new(out)
}

fn c9_fork_rule() -> Check {
    let ks = keys(4);
    let anchor = Hash32([7; 32]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ties, mut block_heavy_losers) = (0, 0);
    for trial in 0..400u64 {
        let count = rng.gen_range(2..=3);
        let specs: Vec<Vec<(usize, u64)>> = (0..count)
            .map(|_| {
                let len = rng.gen_range(1..=30);
                let mut turns: Vec<u64> = (0..len).map(|_| rng.gen_range(0..6)).collect();
                turns.sort_unstable();
                turns.into_iter().map(|t| ((t % 4) as usize, t)).collect()
            })
            .collect();
        let branches: Vec<Branch> = specs
            .iter()
            .enumerate()
            .map(|(i, s)| branch(s, anchor, &ks, trial * 8 + i as u64))
            .collect();
        let turns: Vec<usize> = specs
            .iter()
            .map(|s| s.iter().collect::<BTreeSet<_>>().len())
            .collect();
        let best = *turns.iter().max().unwrap();
        let policy = ForkPolicy {
            randomization: Some(rng.gen()),
            ..ForkPolicy::default()
        };
        let r = resolve_fork(&branches, &policy).map_err(|e| e.to_string())?;
        let chosen = r.chosen();
        ensure!(
            turns[chosen] == best,
            "trial {trial}: chose {} turns, best {best}",
            turns[chosen]
        );
        let most_blocks = specs.iter().map(Vec::len).max().unwrap();
        if specs[chosen].len() < most_blocks {
            block_heavy_losers += 1;
        }
        let tied = turns.iter().filter(|&&t| t == best).count();
        match r {
            Resolution::ContinueMostProgressive {
                tie_break: TieBreak::Randomization { .. },
                ..
            } => {
                ensure!(tied > 1, "trial {trial}: randomization without a tie");
                ties += 1;
            }
            Resolution::ContinueMostProgressive {
                tie_break: TieBreak::None,
                ..
            } => {
                ensure!(
                    tied == 1,
                    "trial {trial}: tie resolved without randomization"
                );
            }
            other => return Err(format!("trial {trial}: unexpected {other:?}")),
        }
    }
    ensure!(
        ties > 0 && block_heavy_losers > 0,
        "generator produced no ties or no block-heavy losers"
    );
    Ok(format!(
        "400 forks, {ties} ties randomized, {block_heavy_losers} longer branches rejected"
    ))
}

fn skew_run(seed: u64, node: usize, offset: i64) -> Result<u64, String> {
    let c = SimConfig {
        seed,
        rounds: 2,
        ..SimConfig::default()
    };
    let ev = [FaultEvent::new(0, FaultKind::ClockSkew { node, offset })];
    Ok(run(&c, &ev)
        .map_err(|e| e.to_string())?
        .metrics
        .dual_leader_ticks)
}

fn c10_skew() -> Check {
    let t = SimConfig::default().transition as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for seed in 0..100 {
        let node = rng.gen_range(0..8);
        let offset = rng.gen_range(-(t - 1)..=t - 1);
        let dual = skew_run(seed, node, offset)?;
        ensure!(
            dual == 0,
            "seed {seed} n{node} skew {offset}: {dual} dual-leader ticks"
        );
    }
    let mut overlapping = 0;
    for seed in 0..100 {
        overlapping += (skew_run(seed, (seed % 8) as usize, t + 1)? > 0) as u32;
    }
    ensure!(overlapping > 0, "skew {} never overlapped", t + 1);
    Ok(format!(
        "|skew|<{t}: 0 overlaps in 100 runs; skew {}: {overlapping}/100 overlap",
        t + 1
    ))
}

/// Trace digest of the scripted game, frozen from a reference run.
const GAME_DIGEST: &str = "e983c6c832b6694b57dab5b5c95d7aa6499271d4cebd3d4946df8735a4bfb8a0";

fn c11_game() -> Check {
    let g = run_rfts(&RftsConfig::scripted(1)).map_err(|e| e.to_string())?;
    ensure!(g.conserved, "ships not conserved");
    let view = RevealView::from_chain(&g.chain);
    for (p, v) in g.claims.iter().enumerate() {
        let open = g
            .chain
            .transactions()
            .filter(|(_, tx)| tx.author == g.players[p] && !g.chain.is_invalidated(&tx.id))
            .filter(|(_, tx)| classify(tx, &view).is_unrevealed())
            .count();
        match v {
            Verdict::Granted => ensure!(open == 0, "n{p} granted with {open} open commitments"),
            Verdict::Denied {
                reason: DenyReason::Unrevealed(_),
                ..
            } => {
                ensure!(
                    open > 0,
                    "n{p} denied as unrevealed but disclosed everything"
                )
            }
            Verdict::Denied { .. } => {}
        }
    }
    ensure!(!g.granted().is_empty(), "nobody granted");
    ensure!(
        g.claims.iter().any(|v| matches!(
            v,
            Verdict::Denied {
                reason: DenyReason::Unrevealed(_),
                ..
            }
        )),
        "withholder not denied"
    );
    let ds = g.double_spend.as_ref().ok_or("double spend not detected")?;
    ensure!(
        ds.vote.passed && !ds.invalidated.is_empty(),
        "invalidation vote failed"
    );
    let again = run_rfts(&RftsConfig::scripted(1)).map_err(|e| e.to_string())?;
    ensure!(again.text == g.text, "game trace not reproducible");
    let digest = g.digest().to_hex();
    ensure!(
        digest == GAME_DIGEST,
        "digest {digest} != pinned {GAME_DIGEST}"
    );
    Ok(format!(
        "granted {:?}, {} invalidated, digest {}",
        g.granted(),
        ds.invalidated.len(),
        &digest[..16]
    ))
}

fn c12_determinism() -> Check {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    ensure!(!files.is_empty(), "no scenarios");
    let c = SimConfig {
        nodes: 10,
        ..SimConfig::default()
    };
    for f in &files {
        let ev = parse_scenario(&std::fs::read_to_string(f).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", f.display()))?;
        let a = run(&c, &ev).map_err(|e| e.to_string())?;
        let b = run(&c, &ev).map_err(|e| e.to_string())?;
        ensure!(
            a.trace.text() == b.trace.text(),
            "{} differs between runs",
            f.display()
        );
    }
    Ok(format!("{} scenarios byte-identical twice", files.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("pull intervals", c1_pull_intervals),
        ("push tree", c2_push_tree),
        ("randomization", c3_randomization),
        ("shuffle BFT", c4_shuffle_bft),
        ("deck roundtrip", c5_deck_roundtrip),
        ("storage model", c6_storage),
        ("break-even", c7_breakeven),
        ("consensus safety", c8_safety),
        ("fork rule", c9_fork_rule),
        ("skew/no-fork", c10_skew),
        ("game end-to-end", c11_game),
        ("determinism", c12_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
