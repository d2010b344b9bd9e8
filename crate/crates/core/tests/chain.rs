mod common;

use common::{build_chain, keys};
use pot_core::chain::{
    make_transaction, read_snapshot, validate_chain, write_snapshot, Block, BlockKind, Chain,
    ChainError, FindingKind, GenesisConfig, NodeId, NodeKey, TransactionKind,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const GOLDEN_CONFIG_DIGEST: &str =
    "4555eee4e9d242df58bcc3aabec3a0992d5756e4eae952ce7a17e3eb88404bea";
const GOLDEN_GENESIS_HASH: &str =
    "9650027a3dc85e21adcb3e781f4708be708c8584c12e9c85efae1d61ccce9642";

fn golden_config() -> GenesisConfig {
    GenesisConfig {
        network_id: "pot-golden".into(),
        turn_duration: 60,
        transition_duration: 5,
        roster: vec![NodeId::new("alice", [1; 32]), NodeId::new("bob", [2; 32])],
    }
}

#[test]
fn genesis_hash_matches_reference_digest() {
    let cfg = golden_config();
    assert_eq!(cfg.digest().to_hex(), GOLDEN_CONFIG_DIGEST);
    assert_eq!(cfg.genesis_hash().to_hex(), GOLDEN_GENESIS_HASH);
}

#[test]
fn genesis_config_text_roundtrip() {
    let cfg = golden_config();
    let parsed = GenesisConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(parsed, cfg);
    assert_eq!(parsed.genesis_hash(), cfg.genesis_hash());
    assert!(GenesisConfig::parse("turn = 3\n").is_err());
    assert!(GenesisConfig::parse("network_id = x\nturn = 1\ntransition = 1\nbogus = 2\n").is_err());
}

#[test]
fn fresh_chain_validates() {
    let chain = build_chain(&keys(4), 10);
    assert_eq!(chain.len(), 11);
    assert!(validate_chain(&chain).is_empty());
    assert!(chain
        .validate_against(common::genesis_for(&keys(4)).genesis_hash())
        .is_empty());
}

#[test]
fn wrong_genesis_is_reported() {
    let chain = build_chain(&keys(4), 2);
    let report = chain.validate_against(golden_config().genesis_hash());
    assert!(matches!(
        report.findings[0].kind,
        FindingKind::GenesisMismatch { .. }
    ));
}

#[test]
fn tampered_body_flags_suffix() {
    let chain = build_chain(&keys(4), 10);
    let mut blocks = chain.blocks().to_vec();
    blocks[3].transactions[0].body[0] ^= 1;
    let tampered = Chain::from_parts(blocks, 0, Default::default());
    let report = validate_chain(&tampered);
    assert_eq!(report.flagged_heights(), (3..=10).collect::<Vec<u64>>());
    assert!(report
        .findings
        .iter()
        .any(|f| f.height == 4 && f.kind == FindingKind::BadLink));
}

#[test]
fn foreign_signature_flagged() {
    let ks = keys(3);
    let mut chain = build_chain(&ks, 2);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let tx = make_transaction(
        &ks[0],
        TransactionKind::Payload,
        b"x".to_vec(),
        None,
        &mut rng,
    )
    .unwrap();
    // Author claims to be n0, but n1 signs.
    let b = Block::new(
        3,
        chain.tip_hash(),
        ks[0].id().clone(),
        3,
        80,
        BlockKind::Data,
        vec![tx],
    )
    .signed(&ks[1]);
    assert!(matches!(
        chain.clone().append_block(b.clone()),
        Err(ChainError::BadSignature { .. })
    ));
    let mut blocks = chain.blocks().to_vec();
    blocks.push(b);
    let report = validate_chain(&Chain::from_parts(blocks, 0, Default::default()));
    assert!(report
        .findings
        .iter()
        .any(|f| f.height == 3 && matches!(f.kind, FindingKind::ForeignSigner { .. })));
    chain
        .invalidate(chain.blocks()[1].transactions[0].id)
        .unwrap();
    assert!(validate_chain(&chain).is_empty());
}

#[test]
fn append_rules() {
    let ks = keys(3);
    let mut chain = build_chain(&ks, 1);
    let stale = chain.blocks()[0].hash();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let tx = make_transaction(
        &ks[1],
        TransactionKind::Payload,
        b"y".to_vec(),
        None,
        &mut rng,
    )
    .unwrap();
    let bad_link = Block::new(
        2,
        stale,
        ks[1].id().clone(),
        1,
        30,
        BlockKind::Data,
        vec![tx.clone()],
    )
    .signed(&ks[1]);
    assert_eq!(
        chain.clone().append_block(bad_link),
        Err(ChainError::BadLink { height: 2 })
    );

    let one_sig = Block::new(
        2,
        chain.tip_hash(),
        ks[1].id().clone(),
        1,
        30,
        BlockKind::Handover,
        vec![],
    )
    .signed(&ks[1]);
    assert!(matches!(
        chain.clone().append_block(one_sig.clone()),
        Err(ChainError::BadSignature { .. })
    ));
    let two_sig = one_sig.signed(&ks[2]);
    chain.append_block(two_sig).unwrap();

    let empty = Block::new(
        3,
        chain.tip_hash(),
        ks[2].id().clone(),
        2,
        60,
        BlockKind::Data,
        vec![],
    )
    .signed(&ks[2]);
    assert!(matches!(
        chain.clone().append_block(empty),
        Err(ChainError::MalformedBlock { .. })
    ));
    let fin = Block::new(
        3,
        chain.tip_hash(),
        ks[2].id().clone(),
        2,
        60,
        BlockKind::Finalizing,
        vec![],
    )
    .signed(&ks[2]);
    chain.append_block(fin).unwrap();
    assert!(validate_chain(&chain).is_empty());
}

#[test]
fn invalidation_never_deletes() {
    let mut chain = build_chain(&keys(3), 3);
    let id = chain.blocks()[2].transactions[0].id;
    chain.invalidate(id).unwrap();
    assert_eq!(chain.len(), 4);
    assert!(chain.find_transaction(&id).is_some());
    assert!(chain.invalidate(pot_core::Hash32([9; 32])).is_err());
}

#[test]
fn snapshot_roundtrip() {
    let mut chain = build_chain(&keys(3), 5);
    chain
        .invalidate(chain.blocks()[1].transactions[0].id)
        .unwrap();
    chain.set_fixed_upto(2).unwrap();
    let bytes = write_snapshot(&chain);
    assert_eq!(&bytes[..4], b"POTC");
    assert_eq!(&bytes[4..6], &[1, 0]);
    let back = read_snapshot(&bytes).unwrap();
    assert_eq!(back, chain);
    assert!(read_snapshot(b"NOPE").is_err());
    assert!(read_snapshot(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn bloat_padding_equalizes_sizes() {
    let k = NodeKey::from_seed("p", [4; 32]);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let sizes: Vec<u64> = [
        (TransactionKind::Bloat, 3usize),
        (TransactionKind::HiddenEncrypted, 700),
        (TransactionKind::Bloat, 999),
    ]
    .iter()
    .map(|(kind, len)| {
        make_transaction(&k, *kind, vec![1; *len], Some(1000), &mut rng)
            .unwrap()
            .declared_size
    })
    .collect();
    assert_eq!(sizes, vec![1000, 1000, 1000]);
}

proptest! {
    #[test]
    fn padded_sizes_constant(lens in proptest::collection::vec(0usize..512, 1..12), pad in 512u64..2048) {
        let k = NodeKey::from_seed("p", [4; 32]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for (i, len) in lens.iter().enumerate() {
            let kind = if i % 2 == 0 { TransactionKind::Bloat } else { TransactionKind::HiddenGameHash };
            let tx = make_transaction(&k, kind, vec![0; *len], Some(pad), &mut rng).unwrap();
            prop_assert_eq!(tx.declared_size, pad);
            prop_assert!(tx.check().is_ok());
        }
    }

    #[test]
    fn any_single_byte_flip_is_detected(block in 1usize..6, byte in 0usize..7) {
        let chain = build_chain(&keys(3), 6);
        let mut blocks = chain.blocks().to_vec();
        let body = &mut blocks[block].transactions[0].body;
        let at = byte % body.len();
        body[at] ^= 0x40;
        let report = validate_chain(&Chain::from_parts(blocks, 0, Default::default()));
        prop_assert_eq!(report.flagged_heights(), (block as u64..=6).collect::<Vec<u64>>());
    }
}
