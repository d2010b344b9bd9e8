mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::keys;
use pot_core::chain::{Block, BlockKind, Hash32, NodeId, NodeKey};
use pot_core::consensus::Fraction;
use pot_core::peering::{
    drains, full_push, guess_leader, hops, pull_interval, pull_once, push_round, relative_index,
    serve_update, PullError, PullNode, PushTree, TransitionMark, UpdateRequest, UpdateResponse,
    UpdateResult, UpdateSource,
};
use proptest::prelude::*;

#[test]
fn interval_anchors() {
    assert_eq!(pull_interval(-9, 60), Fraction::from_integer(30));
    assert_eq!(pull_interval(-25, 60), Fraction::from_integer(120));
    assert_eq!(pull_interval(0, 60), Fraction::from_integer(12));
}

#[test]
fn guessing() {
    let period = 65;
    assert_eq!(guess_leader(2, 100, 8, period, 100 + 3 * period), 5);
    assert_eq!(guess_leader(2, 100, 8, period, 100), 2);
    assert_eq!(guess_leader(2, 100, 8, period, 100 + 8 * period), 2);
    assert_eq!(guess_leader(2, 100, 8, period, 100 + 3 * period - 1), 4);
}

/// In-memory network: every online node serves the same block list.
struct Net {
    blocks: Vec<Block>,
    online: BTreeSet<NodeId>,
    referrals: BTreeMap<NodeId, NodeId>,
    asked: Vec<NodeId>,
}

impl UpdateSource for Net {
    fn request(&mut self, target: &NodeId, req: &UpdateRequest) -> UpdateResponse {
        self.asked.push(target.clone());
        if !self.online.contains(target) {
            return UpdateResponse::NoAnswer;
        }
        if let Some(to) = self.referrals.get(target) {
            return UpdateResponse::Referral(to.clone());
        }
        serve_update(&self.blocks, req)
    }
}

fn transition(k: &NodeKey, succ: &NodeKey, turn: u64, at: u64, prev: Hash32, height: u64) -> Block {
    Block::new(
        height,
        prev,
        k.id().clone(),
        turn,
        at,
        BlockKind::Handover,
        vec![],
    )
    .signed(k)
    .signed(succ)
}

fn fixture(n: usize) -> (Vec<NodeKey>, Vec<Block>, PullNode) {
    let ks = keys(n);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let first = transition(&ks[0], &ks[1], 0, 55, Hash32::ZERO, 1);
    let blocks = vec![first.clone()];
    let node = PullNode {
        id: roster[n - 1].clone(),
        roster,
        turn: 60,
        transition: 5,
        mark: TransitionMark {
            leader_pos: 1,
            tick: 60,
            block: first.hash(),
        },
    };
    (ks, blocks, node)
}

#[test]
fn offline_guess_falls_back_to_predecessor() {
    let (ks, blocks, mut node) = fixture(8);
    let online: BTreeSet<NodeId> = ks
        .iter()
        .map(|k| k.id().clone())
        .filter(|id| *id != ks[3].id().clone())
        .collect();
    let mut net = Net {
        blocks,
        online,
        referrals: BTreeMap::new(),
        asked: vec![],
    };
    // 2 periods after the mark: guess is position 3, which is offline.
    let r = pull_once(&mut node, 60 + 2 * 65, &mut net).unwrap();
    match r {
        UpdateResult::Updated { from, probes, .. } => {
            assert_eq!(probes, 2);
            assert_eq!(from, ks[2].id().clone());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn recalibration_after_early_turns() {
    let (ks, mut blocks, mut node) = fixture(8);
    // Turns 1..=4 ended early; the actual leader is 4 positions past a stiff guess.
    let mut at = 60;
    for turn in 1..=4u64 {
        at += 10;
        let prev = blocks.last().unwrap().hash();
        let h = blocks.len() as u64 + 1;
        blocks.push(transition(
            &ks[turn as usize],
            &ks[turn as usize + 1],
            turn,
            at,
            prev,
            h,
        ));
        at += 5;
    }
    let online = ks.iter().map(|k| k.id().clone()).collect();
    let mut net = Net {
        blocks,
        online,
        referrals: BTreeMap::new(),
        asked: vec![],
    };
    let now = at + 3;
    assert_eq!(node.guess(now), 1);
    let r = pull_once(&mut node, now, &mut net).unwrap();
    assert!(matches!(
        r,
        UpdateResult::Updated {
            recalibrated: true,
            ..
        }
    ));
    assert_eq!(node.guess(now), 5);
    assert_eq!(node.mark.tick, at);
}

#[test]
fn referral_is_followed() {
    let (ks, blocks, mut node) = fixture(8);
    let online = ks.iter().map(|k| k.id().clone()).collect();
    let referrals = [(ks[1].id().clone(), ks[5].id().clone())].into();
    let mut net = Net {
        blocks,
        online,
        referrals,
        asked: vec![],
    };
    let r = pull_once(&mut node, 61, &mut net).unwrap();
    assert!(matches!(r, UpdateResult::Updated { probes: 2, .. }));
    assert_eq!(net.asked, vec![ks[1].id().clone(), ks[5].id().clone()]);
}

#[test]
fn nobody_answers() {
    let (_, blocks, mut node) = fixture(5);
    let mut net = Net {
        blocks,
        online: BTreeSet::new(),
        referrals: BTreeMap::new(),
        asked: vec![],
    };
    assert_eq!(
        pull_once(&mut node, 61, &mut net),
        Err(PullError::NetworkLost)
    );
    assert_eq!(net.asked.len(), 4);
}

#[test]
fn leader_skips_pulling() {
    let (_, blocks, mut node) = fixture(5);
    let mut net = Net {
        blocks,
        online: BTreeSet::new(),
        referrals: BTreeMap::new(),
        asked: vec![],
    };
    // Position 4 leads three periods after position 1.
    assert_eq!(
        pull_once(&mut node, 60 + 3 * 65, &mut net),
        Ok(UpdateResult::Skipped)
    );
}

#[test]
fn unknown_transition_gets_no_suffix() {
    let (_, blocks, _) = fixture(3);
    let req = UpdateRequest {
        requester: NodeId::new("x", [0; 32]),
        last_known_transition: Hash32([7; 32]),
    };
    assert_eq!(serve_update(&blocks, &req), UpdateResponse::NoAnswer);
}

#[test]
fn drain_examples() {
    assert_eq!(drains(2, 500), (20..=29).collect::<Vec<_>>());
    assert_eq!(drains(55, 600), (550..=559).collect::<Vec<_>>());
    assert_eq!(drains(4, 43), vec![40, 41, 42]);
}

#[test]
fn full_coverage_and_hop_bound() {
    for n in [50usize, 200, 1000] {
        let online: BTreeSet<usize> = (1..n).collect();
        let r = push_round(&PushTree::new(n), &online, 0);
        assert!(r.unreached().is_empty());
        assert!(r.receipts.iter().all(|&c| c == 1));
        assert_eq!(r.max_hops(), hops(n - 1));
        for d in &r.deliveries {
            assert_eq!(d.hops, Some(hops(d.index)));
        }
    }
    let online: BTreeSet<usize> = (1..200).collect();
    assert_eq!(
        push_round(&PushTree::new(200), &online, 0).hops_of(157),
        Some(3)
    );
}

#[test]
fn offline_distributor_and_rotation() {
    let n = 100;
    // Absolute position 6 is offline; the leader sits at absolute 0.
    let offline_abs = 6;
    let online_for = |leader: usize| -> BTreeSet<usize> {
        (1..n)
            .filter(|&rel| (rel + leader) % n != offline_abs)
            .collect()
    };
    let r0 = push_round(&PushTree::new(n), &online_for(0), 0);
    let expected: BTreeSet<usize> = [6].into_iter().chain(60..70).collect();
    assert_eq!(r0.unreached(), expected);
    let r1 = push_round(&PushTree::new(n), &online_for(1), 1);
    assert!((60..70).all(|i| r1.reached().contains(&i)));
    assert_eq!(r1.unreached(), [5].into_iter().chain(50..60).collect());
}

#[test]
fn jump_pipes_bypass_offline_drain() {
    let n = 100;
    let online: BTreeSet<usize> = (1..n).filter(|&i| i != 2).collect();
    let tree = PushTree {
        jump_pipes: true,
        ..PushTree::new(n)
    };
    let r = push_round(&tree, &online, 0);
    assert_eq!(r.unreached(), [2].into());
    for i in 20..30 {
        assert_eq!(r.deliveries[i].source, Some(0));
        assert_eq!(r.hops_of(i), Some(1));
    }
}

#[test]
fn horizontal_pipes_adopt_neighbours() {
    let n = 100;
    let online: BTreeSet<usize> = (1..n).filter(|&i| i != 3).collect();
    let tree = PushTree {
        horizontal_pipes: true,
        ..PushTree::new(n)
    };
    let r = push_round(&tree, &online, 0);
    assert_eq!(r.unreached(), [3].into());
    assert_eq!(r.deliveries[35].source, Some(2));
}

#[test]
fn full_push_reaches_all_online() {
    let online: BTreeSet<usize> = (1..30).filter(|i| i % 7 != 0).collect();
    let r = full_push(30, &online, 2);
    assert_eq!(r.unreached(), [7, 14, 21, 28].into());
    assert_eq!(r.max_hops(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unique_source_coverage(n in 1usize..10_000) {
        let online: BTreeSet<usize> = (1..n).collect();
        let r = push_round(&PushTree::new(n), &online, 0);
        prop_assert!(r.receipts.iter().all(|&c| c == 1));
        prop_assert!(r.unreached().is_empty());
        prop_assert_eq!(r.max_hops(), if n > 1 { hops(n - 1) } else { 0 });
    }

    #[test]
    fn rotation_heals_within_one_round(n in 12usize..1500, offline in 0usize..1500) {
        let offline = offline % n;
        let mut prev: BTreeSet<usize> = BTreeSet::new();
        for leader in 0..n {
            if leader == offline {
                prev.clear();
                continue;
            }
            let online: BTreeSet<usize> = (1..n).filter(|&rel| (rel + leader) % n != offline).collect();
            let r = push_round(&PushTree::new(n), &online, leader as u64);
            let rel_off = relative_index(offline, leader, n);
            let missed: BTreeSet<usize> = r.unreached().into_iter().filter(|&i| i != rel_off).collect();
            prop_assert!(missed.is_disjoint(&prev), "index range unreached twice in a row");
            prev = missed;
        }
    }
}
