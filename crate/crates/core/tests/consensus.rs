mod common;

use std::collections::BTreeSet;

use common::keys;
use pot_core::chain::{
    make_transaction, Block, BlockKind, Hash32, NodeId, NodeKey, TransactionKind,
};
use pot_core::consensus::{
    current_leader, merge_block, open_vote, resolve_fork, turn_index, AdaptError, AdaptEvent,
    AdaptivePolicy, AdaptiveState, Admission, Ballot, Branch, ConsensusError, EarlyFinalizeMode,
    ForkError, ForkPolicy, Fraction, JoinProposal, LeaderState, LeaveNotice, Membership,
    MembershipError, PotState, Resolution, ScheduleAdjustment, TieBreak, Timeline, TurnSchedule,
    VoteQuestion,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn setup(n: usize, t: u64, tt: u64) -> (Vec<NodeKey>, PotState) {
    let ks = keys(n);
    let mut cfg = common::genesis_for(&ks);
    cfg.turn_duration = t;
    cfg.transition_duration = tt;
    let schedule = TurnSchedule::new(cfg.roster.clone(), t, tt).unwrap();
    (ks, PotState::new(schedule, cfg.chain()))
}

fn payload(k: &NodeKey, n: usize) -> Vec<pot_core::Transaction> {
    let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
    (0..n)
        .map(|i| {
            make_transaction(
                k,
                TransactionKind::Payload,
                vec![i as u8; 8],
                None,
                &mut rng,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn leader_and_transition_windows() {
    let (ks, mut st) = setup(3, 60, 5);
    assert_eq!(
        st.current_leader(0),
        LeaderState::Leader {
            node: ks[0].id().clone(),
            turn: 0,
            turn_end: 60
        }
    );
    for now in 60..65 {
        assert_eq!(
            st.current_leader(now),
            LeaderState::Transition {
                prev: ks[0].id().clone(),
                next: ks[1].id().clone(),
                until: 65
            }
        );
    }
    assert_eq!(st.current_leader(65).leader(), Some(ks[1].id()));
    assert_eq!(
        current_leader(200, st.schedule(), st.chain().blocks()).leader(),
        Some(ks[0].id())
    );
}

#[test]
fn propose_rules() {
    let (ks, mut st) = setup(3, 60, 5);
    let b = st.propose_block(&ks[0], payload(&ks[0], 3), 10).unwrap();
    assert_eq!(b.transactions.len(), 3);
    assert_eq!(st.chain().len(), 2);
    assert_eq!(
        st.propose_block(&ks[1], payload(&ks[1], 1), 11),
        Err(ConsensusError::NotLeader("n1".into()))
    );
    assert_eq!(
        st.propose_block(&ks[0], payload(&ks[0], 1), 59),
        Err(ConsensusError::TurnExpired { turn: 0 })
    );
    assert_eq!(
        st.propose_block(&ks[0], payload(&ks[0], 1), 55),
        Err(ConsensusError::TurnExpired { turn: 0 })
    );
    st.propose_block(&ks[0], payload(&ks[0], 1), 54).unwrap();
}

#[test]
fn finalize_early_shifts_next_turn() {
    let (ks, mut st) = setup(3, 60, 5);
    st.finalize_turn(&ks[0], 24).unwrap();
    assert_eq!(
        st.propose_block(&ks[0], payload(&ks[0], 1), 25),
        Err(ConsensusError::TurnExpired { turn: 0 })
    );
    assert!(matches!(
        st.current_leader(28),
        LeaderState::Transition { until: 29, .. }
    ));
    assert_eq!(st.current_leader(29).leader(), Some(ks[1].id()));
    assert_eq!(
        st.finalize_turn(&ks[2], 30),
        Err(ConsensusError::NotLeader("n2".into()))
    );
}

#[test]
fn wait_regular_slot_mode_keeps_slots() {
    let ks = keys(3);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let schedule = TurnSchedule::new(roster, 60, 5)
        .unwrap()
        .with_mode(EarlyFinalizeMode::WaitRegularSlot);
    let mut st = PotState::new(schedule, common::genesis_for(&ks).chain());
    st.finalize_turn(&ks[0], 24).unwrap();
    assert!(matches!(
        st.current_leader(40),
        LeaderState::Transition { until: 65, .. }
    ));
    assert_eq!(st.current_leader(65).leader(), Some(ks[1].id()));
}

#[test]
fn round_of_early_finalizations() {
    let (ks, mut st) = setup(8, 60, 5);
    let mut now = 0;
    for turn in 0..8u64 {
        let start = st.timeline().slot(turn).start;
        now = start + 6;
        st.finalize_turn(&ks[turn as usize], now).unwrap();
    }
    let round_end = st.timeline().slot(7).next_start;
    assert_eq!(round_end, 8 * (6 + 5));
    assert!(now < round_end);
    assert_eq!(st.events().count("finalize"), 8);
}

/// Six leaders finalize at 10% of their slot; the seventh node wakes at its
/// regular slot, long after its shifted turn passed.
#[test]
fn sleeper_misses_shifted_turn() {
    let (ks, mut st) = setup(8, 60, 5);
    for turn in 0..6u64 {
        let start = st.timeline().slot(turn).start;
        st.finalize_turn(&ks[turn as usize], start + 6).unwrap();
    }
    let shifted = st.timeline().slot(6).clone();
    assert_eq!(shifted.start, 6 * 11);
    assert_eq!(st.current_leader(shifted.start).leader(), Some(ks[6].id()));
    // A node pulling once per round expects the stiff slot.
    let expected_wake = 6 * (60 + 5);
    assert!(
        expected_wake >= shifted.end,
        "sleeper wakes at {expected_wake}, slot ended {}",
        shifted.end
    );
    assert_ne!(st.current_leader(expected_wake).leader(), Some(ks[6].id()));
}

#[test]
fn handover_requires_successor() {
    let (ks, mut st) = setup(3, 60, 5);
    assert_eq!(
        st.handover(&ks[0], ks[2].id(), Some(&ks[2]), 50),
        Err(ConsensusError::WrongSuccessor("n2".into()))
    );
    assert_eq!(
        st.handover(&ks[0], ks[1].id(), None, 50),
        Err(ConsensusError::MissingCounterSignature)
    );
    assert_eq!(
        st.handover(&ks[0], ks[1].id(), Some(&ks[2]), 50),
        Err(ConsensusError::MissingCounterSignature)
    );
    let b = st.handover(&ks[0], ks[1].id(), Some(&ks[1]), 50).unwrap();
    assert_eq!(b.signatures.len(), 2);
    assert_eq!(st.current_leader(55).leader(), Some(ks[1].id()));
}

#[test]
fn state_digest_is_deterministic() {
    let run = || {
        let (ks, mut st) = setup(4, 20, 5);
        st.propose_block(&ks[0], payload(&ks[0], 2), 1).unwrap();
        st.finalize_turn(&ks[0], 8).unwrap();
        st.propose_block(&ks[1], payload(&ks[1], 1), 14).unwrap();
        st.apply_adjustment(ScheduleAdjustment::Pause { at: 20, length: 7 }, 15);
        (st.digest(), st.events().to_text())
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().count(), 4);
}

#[test]
fn pause_shifts_all_later_turns() {
    let ks = keys(4);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let base = TurnSchedule::new(roster, 60, 5).unwrap();
    let mut paused = base.clone();
    paused.apply(ScheduleAdjustment::Pause {
        at: 100,
        length: 40,
    });
    let mut a = Timeline::new(base, Default::default());
    let mut b = Timeline::new(paused, Default::default());
    assert_eq!(a.slot(0), b.slot(0));
    for turn in 1..10 {
        assert_eq!(b.slot(turn).end, a.slot(turn).end + 40);
    }
}

#[test]
fn lost_leader_grace_then_skip() {
    let ks = keys(4);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let mut adaptive = AdaptiveState::new(AdaptivePolicy {
        grace: 120,
        max_consecutive_pauses: 2,
    });
    let adj = adaptive
        .adapt_turn_time(&AdaptEvent::LostLeader { turn: 1 }, None)
        .unwrap();
    assert_eq!(
        adj,
        ScheduleAdjustment::Grace {
            turn: 1,
            extra: 120
        }
    );
    assert_eq!(
        adaptive.adapt_turn_time(&AdaptEvent::LostLeader { turn: 1 }, None),
        Err(AdaptError::GraceUsed(1))
    );
    let base = TurnSchedule::new(roster, 60, 5).unwrap();
    let mut graced = base.clone();
    graced.apply(adj);
    let mut a = Timeline::new(base, Default::default());
    let mut b = Timeline::new(graced, Default::default());
    assert_eq!(b.slot(2).start, a.slot(2).start + 120);
    assert_eq!(b.slot(2).leader, ks[2].id().clone());
}

#[test]
fn pause_cap() {
    let ks = keys(3);
    let mut adaptive = AdaptiveState::new(AdaptivePolicy::default());
    let mut v = open_vote(
        Hash32::ZERO,
        VoteQuestion::Pause { at: 0, length: 10 },
        0,
        0,
        Fraction::new(1, 2),
    );
    v.cast_ballot(ks[0].id(), Ballot::Yes, 0).unwrap();
    let active: BTreeSet<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let yes = v.tally(&active, 0).unwrap();
    let ev = |at| AdaptEvent::NightSwitch {
        requester: ks[1].id().clone(),
        at,
        length: 10,
    };
    adaptive.adapt_turn_time(&ev(100), Some(&yes)).unwrap();
    adaptive.adapt_turn_time(&ev(200), Some(&yes)).unwrap();
    assert!(matches!(
        adaptive.adapt_turn_time(&ev(300), Some(&yes)),
        Err(AdaptError::GraceExhausted { count: 2, .. })
    ));
    let other = AdaptEvent::VacationBreak {
        requester: ks[2].id().clone(),
        at: 400,
        length: 5,
    };
    let mut no = yes.clone();
    no.passed = false;
    assert_eq!(
        adaptive.adapt_turn_time(&other, Some(&no)),
        Err(AdaptError::VoteFailed)
    );
    adaptive.adapt_turn_time(&other, Some(&yes)).unwrap();
    adaptive.adapt_turn_time(&ev(500), Some(&yes)).unwrap();
}

fn tally_with(n: usize, yes: usize, no: usize, theta: Fraction) -> pot_core::consensus::Outcome {
    let ids: Vec<NodeId> = (0..n)
        .map(|i| NodeId::new(format!("v{i}"), [i as u8 + 1; 32]))
        .collect();
    let mut v = open_vote(Hash32::ZERO, VoteQuestion::AcceptPrune, 0, 10, theta);
    for (i, id) in ids.iter().enumerate() {
        if i < yes {
            v.cast_ballot(id, Ballot::Yes, 1).unwrap();
        } else if i < yes + no {
            v.cast_ballot(id, Ballot::No, 1).unwrap();
        }
    }
    v.tally(&ids.into_iter().collect(), 10).unwrap()
}

#[test]
fn explicit_no_fails_and_thresholds_are_monotone() {
    assert!(!tally_with(10, 0, 10, Fraction::new(1, 2)).passed);
    let thetas = [
        Fraction::new(333, 1000),
        Fraction::new(1, 2),
        Fraction::new(666, 1000),
    ];
    let ballots = [(10, 2, 5), (10, 4, 6), (10, 0, 6), (10, 1, 5), (9, 2, 4)];
    let mut prev: Option<Vec<bool>> = None;
    for theta in thetas {
        let outcomes: Vec<bool> = ballots
            .iter()
            .map(|&(n, y, no)| tally_with(n, y, no, theta).passed)
            .collect();
        if let Some(p) = prev {
            for (a, b) in p.iter().zip(&outcomes) {
                assert!(*a || !*b, "pass set must shrink as the threshold rises");
            }
        }
        prev = Some(outcomes);
    }
}

#[test]
fn membership_rules() {
    let ks = keys(5);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let mut m = Membership::new(TurnSchedule::new(roster, 20, 5).unwrap());
    let newbie = NodeKey::from_seed("new", [77; 32]);
    let prop = |i| JoinProposal {
        candidate: newbie.id().clone(),
        insert_at: i,
    };
    assert_eq!(
        m.join_node(&prop(0), Admission::TrustedEntity, 0)
            .unwrap_err(),
        MembershipError::BadInsertIndex { index: 0 }
    );
    assert_eq!(
        m.join_node(&prop(1), Admission::TrustedEntity, 0)
            .unwrap_err(),
        MembershipError::BadInsertIndex { index: 1 }
    );
    let failed = tally_with(5, 0, 5, Fraction::new(1, 2));
    assert_eq!(
        m.join_node(&prop(5), Admission::Vote(&failed), 0)
            .unwrap_err(),
        MembershipError::NotAdmitted
    );
    let passed = tally_with(5, 5, 0, Fraction::new(1, 2));
    m.join_node(&prop(5), Admission::Vote(&passed), 0).unwrap();
    assert_eq!(m.schedule().len(), 6);
    assert_eq!(m.schedule().leader_of(0), ks[0].id());
    assert_eq!(m.schedule().leader_of(1), ks[1].id());
    assert_eq!(m.schedule().leader_of(5), newbie.id());

    // Leaving with undealt keys.
    let obligation: BTreeSet<Hash32> = [Hash32([5; 32])].into();
    let silent = LeaveNotice {
        node: ks[3].id().clone(),
        disclosed: BTreeSet::new(),
    };
    assert!(matches!(
        m.leave_node(&silent, &obligation, 2),
        Err(MembershipError::UndisclosedObligations { .. })
    ));
    let open = LeaveNotice {
        node: ks[3].id().clone(),
        disclosed: obligation.clone(),
    };
    m.leave_node(&open, &obligation, 2).unwrap();
    assert_eq!(m.schedule().len(), 5);
    assert_eq!(m.schedule().leader_of(2), ks[2].id());
    assert_eq!(m.schedule().leader_of(3), ks[4].id());
    let back = JoinProposal {
        candidate: ks[3].id().clone(),
        insert_at: 1,
    };
    assert_eq!(
        m.join_node(&back, Admission::TrustedEntity, 3).unwrap_err(),
        MembershipError::RejoinForbidden("n3".into())
    );

    assert_eq!(
        m.kick_node(ks[1].id(), &failed, 3).unwrap_err(),
        MembershipError::VoteFailed
    );
    m.kick_node(ks[1].id(), &passed, 3).unwrap();
    assert_eq!(m.schedule().len(), 4);
}

#[test]
fn leader_at_end_forbids_wraparound_successor() {
    let ks = keys(4);
    let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
    let mut m = Membership::new(TurnSchedule::new(roster, 20, 5).unwrap());
    let c = JoinProposal {
        candidate: NodeId::new("c", [99; 32]),
        insert_at: 0,
    };
    assert!(matches!(
        m.join_node(&c, Admission::TrustedEntity, 3),
        Err(MembershipError::BadInsertIndex { .. })
    ));
    let c = JoinProposal {
        candidate: NodeId::new("c", [99; 32]),
        insert_at: 4,
    };
    assert!(matches!(
        m.join_node(&c, Admission::TrustedEntity, 3),
        Err(MembershipError::BadInsertIndex { .. })
    ));
    let c = JoinProposal {
        candidate: NodeId::new("c", [99; 32]),
        insert_at: 2,
    };
    m.join_node(&c, Admission::TrustedEntity, 3).unwrap();
    assert_eq!(m.schedule().leader_of(4), ks[0].id());
}

// Fork resolution.

fn branch(layout: &[(usize, u64)], anchor: Hash32, ks: &[NodeKey]) -> Branch {
    let mut rng = ChaCha20Rng::seed_from_u64(anchor.low_u64() ^ layout.len() as u64);
    let mut prev = anchor;
    let mut out = Vec::new();
    for (i, &(author, turn)) in layout.iter().enumerate() {
        let k = &ks[author];
        let tx = make_transaction(
            k,
            TransactionKind::Payload,
            vec![i as u8, author as u8, turn as u8],
            None,
            &mut rng,
        )
        .unwrap();
        let b = Block::new(
            i as u64 + 1,
            prev,
            k.id().clone(),
            turn,
            turn * 10 + i as u64,
            BlockKind::Data,
            vec![tx],
        )
        .signed(k);
        prev = b.hash();
        out.push(b);
    }
    Branch::new(out)
}

#[test]
fn most_turns_beats_most_blocks() {
    let ks = keys(4);
    let a = branch(&[(0, 0), (1, 1), (2, 2)], Hash32([1; 32]), &ks);
    let b = branch(
        &[(0, 0); 5]
            .iter()
            .chain(&[(3, 3); 4])
            .copied()
            .collect::<Vec<_>>(),
        Hash32([1; 32]),
        &ks,
    );
    assert_eq!((a.turns_represented(), b.turns_represented()), (3, 2));
    let r = resolve_fork(&[a.clone(), b.clone()], &ForkPolicy::default()).unwrap();
    assert_eq!(
        r,
        Resolution::ContinueMostProgressive {
            branch: 0,
            tie_break: TieBreak::None
        }
    );
    let single = resolve_fork(std::slice::from_ref(&b), &ForkPolicy::default()).unwrap();
    assert_eq!(single.chosen(), 0);
    let c = branch(&[(1, 1)], Hash32([2; 32]), &ks);
    assert_eq!(
        resolve_fork(&[a, c], &ForkPolicy::default()),
        Err(ForkError::NoCommonAncestor)
    );
}

#[test]
fn ties_use_randomization() {
    let ks = keys(4);
    let anchor = Hash32([3; 32]);
    let a = branch(&[(1, 1), (2, 2)], anchor, &ks);
    let b = branch(&[(2, 1), (3, 2)], anchor, &ks);
    let policy = ForkPolicy {
        randomization: Some(1523),
        ..Default::default()
    };
    let r = resolve_fork(&[a.clone(), b.clone()], &policy).unwrap();
    assert_eq!(
        r,
        Resolution::ContinueMostProgressive {
            branch: 1,
            tie_break: TieBreak::Randomization {
                value: 1523,
                candidates: vec![0, 1]
            }
        }
    );
    let r = resolve_fork(&[a.clone(), b.clone()], &ForkPolicy::default()).unwrap();
    let lowest = if ks[1].id() < ks[2].id() { 0 } else { 1 };
    assert_eq!(
        r,
        Resolution::ContinueMostProgressive {
            branch: lowest,
            tie_break: TieBreak::LowestAuthor {
                candidates: vec![0, 1]
            }
        }
    );
}

#[test]
fn vote_and_merge_paths() {
    let ks = keys(4);
    let anchor = Hash32([4; 32]);
    let a = branch(&[(1, 1), (2, 2)], anchor, &ks);
    let b = branch(&[(3, 1)], anchor, &ks);
    let passed = tally_with(4, 4, 0, Fraction::new(1, 2));
    let failed = tally_with(4, 0, 4, Fraction::new(1, 2));
    let vote = |o: &pot_core::consensus::Outcome| ForkPolicy {
        vote: Some((o.clone(), 1)),
        ..Default::default()
    };
    assert_eq!(
        resolve_fork(&[a.clone(), b.clone()], &vote(&passed)).unwrap(),
        Resolution::VoteChoice { branch: 1 }
    );
    assert_eq!(
        resolve_fork(&[a.clone(), b.clone()], &vote(&failed))
            .unwrap()
            .chosen(),
        0
    );
    let merge = ForkPolicy {
        mergeable: true,
        ..Default::default()
    };
    assert_eq!(
        resolve_fork(&[a.clone(), b.clone()], &merge).unwrap(),
        Resolution::Merge {
            keep: 0,
            merged: vec![1]
        }
    );
    let tip = a.blocks.last().unwrap();
    let m = merge_block(&ks[2], tip, &a, &[&b], 3, 40).unwrap();
    assert_eq!(m.prev_hash, tip.hash());
    assert_eq!(m.transactions, b.blocks[0].transactions);
    assert!(m.transactions.iter().all(|t| t.check().is_ok()));
    assert!(merge_block(&ks[2], tip, &a, &[&a], 3, 40).is_none());
}

fn brute_force_turns(b: &Branch) -> usize {
    let mut seen: Vec<(Vec<u8>, u64)> = Vec::new();
    for blk in &b.blocks {
        let key = (blk.author.public_key.to_vec(), blk.turn_index);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    seen.len()
}

proptest! {
    #[test]
    fn vote_threshold_is_the_bft_bound(n in 3usize..16, byz in 0usize..16, theta_pct in 20u64..80) {
        let byz = byz.min(n);
        let theta = Fraction::new(theta_pct, 100);
        // Byzantine nodes force an invalidation with explicit yes, honest vote no.
        let o = tally_with(n, byz, n - byz, theta);
        prop_assert_eq!(o.passed, Fraction::new(byz as u64, n as u64) >= theta);
        // A "no" coalition blocks only once the rest cannot reach the threshold.
        let o = tally_with(n, 0, byz, theta);
        prop_assert_eq!(o.passed, Fraction::new((n - byz) as u64, n as u64) >= theta);
    }

    #[test]
    fn padding_inside_turns_never_changes_the_choice(
        turns_a in proptest::collection::vec((0usize..4, 1usize..4), 1..6),
        turns_b in proptest::collection::vec((0usize..4, 1usize..4), 1..6),
        pad in 1usize..5,
    ) {
        let ks = keys(4);
        let expand = |layout: &[(usize, usize)], extra: usize| -> Vec<(usize, u64)> {
            layout.iter().enumerate().flat_map(|(t, &(a, reps))| std::iter::repeat_n((a, t as u64), reps + extra)).collect()
        };
        let anchor = Hash32([9; 32]);
        let a = branch(&expand(&turns_a, 0), anchor, &ks);
        let b = branch(&expand(&turns_b, 0), anchor, &ks);
        let padded = branch(&expand(&turns_b, pad), anchor, &ks);
        let policy = ForkPolicy { randomization: Some(7), ..Default::default() };
        let r1 = resolve_fork(&[a.clone(), b], &policy).unwrap().chosen();
        let r2 = resolve_fork(&[a, padded], &policy).unwrap().chosen();
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn fork_rule_matches_brute_force(
        specs in proptest::collection::vec(proptest::collection::vec((0usize..4, 0u64..6), 1..10), 2..4),
        rand_value in any::<u64>(),
    ) {
        let ks = keys(4);
        let anchor = Hash32([5; 32]);
        let branches: Vec<Branch> = specs.iter().map(|s| branch(s, anchor, &ks)).collect();
        let counts: Vec<usize> = branches.iter().map(brute_force_turns).collect();
        let best = *counts.iter().max().unwrap();
        let policy = ForkPolicy { randomization: Some(rand_value), ..Default::default() };
        let r = resolve_fork(&branches, &policy).unwrap();
        prop_assert_eq!(counts[r.chosen()], best);
        let ties = counts.iter().filter(|&&c| c == best).count();
        match r {
            Resolution::ContinueMostProgressive { tie_break: TieBreak::Randomization { .. }, .. } => prop_assert!(ties > 1),
            Resolution::ContinueMostProgressive { tie_break: TieBreak::None, .. } => prop_assert_eq!(ties, 1),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn at_most_one_writer_per_tick(n in 2usize..9, now in 0u64..5000, fin in proptest::collection::vec(1u64..50, 0..8)) {
        let ks = keys(n);
        let roster: Vec<NodeId> = ks.iter().map(|k| k.id().clone()).collect();
        let mut tl = Timeline::new(TurnSchedule::new(roster.clone(), 50, 5).unwrap(), Default::default());
        for (turn, off) in fin.iter().enumerate() {
            let start = tl.slot(turn as u64).start;
            tl.terminate(turn as u64, start + off);
        }
        let state = tl.leader_state(now);
        let leaders = roster.iter().filter(|id| state.leader() == Some(*id)).count();
        prop_assert!(leaders <= 1);
    }

    #[test]
    fn turn_index_bounds(n in 1usize..200, pos in 0usize..200, leader in 0usize..200) {
        let (pos, leader) = (pos % n, leader % n);
        let x = turn_index(pos, leader, n, Fraction::new(1, 5));
        prop_assert!(x >= -((n * 4 / 5) as i64) && x <= (n / 5) as i64);
        prop_assert_eq!(x == 0, pos == leader);
    }
}
