//! Game contract primitives: hidden commitments and offset reveals,
//! follow-up moves, commit-reveal randomization, card piles, numeric fog
//! of war, trigger events, disputes and win claims.

pub mod commit;
pub mod deck;
pub mod dispute;
pub mod draw;
pub mod fog;
pub mod followup;
pub mod random;
pub mod resilience;
pub mod trigger;
pub mod win;

use chacha20poly1305::aead::Aead;
use chacha20poly1305::{ChaCha20Poly1305, Key, KeyInit, Nonce};

pub use commit::{
    bloat, brute_force, commit, game_hash, CommitMode, CommitOptions, CommitPayload, Commitment,
    Committed, RevealError, RevealRegistry, RevealSecret, RevealedData, BLOAT_MARKER,
};
pub use deck::{
    claim_chain, shuffle_deck, Card, ClaimChain, ClaimStep, DeckCommitment, DeckError, DeckEscrow,
    DeckSecrets,
};
pub use dispute::{
    resolve_dispute, Dispute, DisputeError, DisputeOutcome, DisputeReason, DisputeStrategy, Helper,
    HelperVerdict, Recovery,
};
pub use draw::{
    draw, draw_index, pick_index, DrawCase, DrawError, DrawPolicy, DrawResult, KnownPile, Pile,
};
pub use fog::{fog_report, verify_fog, FogError, FogPolicy, FogReport};
pub use followup::{enforce_timeout, FleetMove, FollowUp, FollowUpBook, FollowUpError, Obligation};
pub use random::{
    mix64, random_commit, Contribution, RandomError, RandomOutput, RandomizationSession, Reading,
    RevealMode, SplitMix64, StopCondition,
};
pub use resilience::{brute_force_resilience, fraud_resilience, groups, Grouping};
pub use trigger::{
    detour, pipe_via_leader, trigger, trigger_round, TriggerError, TriggerIntent, TriggerMechanism,
    TriggerOutcome,
};
pub use win::{win_claim, DenyReason, GameReplay, NoReplay, Verdict};

// Every key below is used for exactly one message, so a fixed nonce is safe.
const NONCE: [u8; 12] = [0; 12];

pub(crate) fn seal(key: &[u8; 32], plain: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(Nonce::from_slice(&NONCE), plain)
        .expect("in-memory encryption")
}

pub(crate) fn open_sealed(key: &[u8; 32], ciphertext: &[u8]) -> Option<Vec<u8>> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .decrypt(Nonce::from_slice(&NONCE), ciphertext)
        .ok()
}
