use pot_core::contracts::{DenyReason, DisputeError, DisputeOutcome, DrawCase, Verdict};
use pot_core::sim::rfts::{rfts_scenario, run_rfts, RftsConfig, RftsError};

#[test]
fn three_players_thirty_rounds() {
    let g = rfts_scenario(3, 30, 1).unwrap();
    assert!(g.conserved);
    assert_eq!(g.replayed.planets, g.state.planets);
    assert_eq!(g.sessions, 30);
    assert!(g.callback.is_some());
    assert!(g.draws.iter().any(|d| d.case == DrawCase::PrivatePrivate));
    assert!(g.draws.iter().any(|d| d.case == DrawCase::PublicPrivate));
    assert!(g.fog_reports > 0);
    assert_eq!(g.fog_rejected, 0);
    assert!(g.bloats > 0);
    // only the player the replay ranks first wins
    assert_eq!(g.granted(), vec![g.victor]);
    for (p, v) in g.claims.iter().enumerate() {
        if p != g.victor {
            assert!(matches!(
                v,
                Verdict::Denied {
                    reason: DenyReason::Replay(_),
                    ..
                }
            ));
        }
    }
}

#[test]
fn withheld_commitment_denies_the_claim() {
    let mut cfg = RftsConfig::new(3, 30, 1);
    let victor = rfts_scenario(3, 30, 1).unwrap().victor;
    cfg.withhold = Some(victor);
    let g = run_rfts(&cfg).unwrap();
    assert_eq!(g.victor, victor);
    assert!(g.granted().is_empty());
    assert!(matches!(
        &g.claims[victor],
        Verdict::Denied { reason: DenyReason::Unrevealed(ids), .. } if ids.len() == 1
    ));
}

#[test]
fn double_spend_is_voted_invalid_and_turn_reset() {
    let g = run_rfts(&RftsConfig::scripted(1)).unwrap();
    let ds = g.double_spend.as_ref().expect("cheat detected");
    assert_eq!(ds.player, 2);
    assert!(ds.vote.passed);
    assert_eq!((ds.vote.yes, ds.vote.no), (2, 1));
    assert!(!ds.invalidated.is_empty());
    assert!(ds.invalidated.iter().all(|id| g.chain.is_invalidated(id)));
    assert_eq!(ds.reset_turn, 6 * 3 + 2);
    assert!(g.text.contains("turn-reset"));
    // struck sends leave no trace in either view
    assert!(g.conserved);
    assert_eq!(g.replayed.planets, g.state.planets);
}

#[test]
fn dropped_shuffler_cannot_be_recovered_without_escrow() {
    let mut cfg = RftsConfig::new(3, 30, 1);
    cfg.drop = Some((2, 10));
    let g = run_rfts(&cfg).unwrap();
    assert!(matches!(
        g.recovery,
        Some(Err(DisputeError::RecoverImpossible(_)))
    ));
    assert!(g.conserved);
    cfg.escrow = true;
    let g = run_rfts(&cfg).unwrap();
    assert_eq!(g.recovery, Some(Ok(DisputeOutcome::Recovered)));
}

#[test]
fn games_are_deterministic() {
    let a = run_rfts(&RftsConfig::scripted(4)).unwrap();
    let b = run_rfts(&RftsConfig::scripted(4)).unwrap();
    assert_eq!(a.text, b.text);
    assert_eq!(a.digest(), b.digest());
    assert_ne!(
        a.digest(),
        run_rfts(&RftsConfig::scripted(5)).unwrap().digest()
    );
}

#[test]
fn player_minimum() {
    assert_eq!(
        rfts_scenario(2, 30, 1).unwrap_err(),
        RftsError::TooFewPlayers(2)
    );
    let mut cfg = RftsConfig::new(3, 5, 1);
    cfg.withhold = Some(5);
    assert!(matches!(run_rfts(&cfg), Err(RftsError::Invalid(_))));
}
