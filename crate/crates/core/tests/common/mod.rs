#![allow(dead_code)]

use pot_core::chain::{
    make_transaction, Block, BlockKind, Chain, GenesisConfig, NodeKey, TransactionKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn keys(n: usize) -> Vec<NodeKey> {
    (0..n)
        .map(|i| NodeKey::from_seed(format!("n{i}"), [i as u8 + 1; 32]))
        .collect()
}

pub fn genesis_for(keys: &[NodeKey]) -> GenesisConfig {
    GenesisConfig {
        network_id: "test-net".into(),
        turn_duration: 20,
        transition_duration: 5,
        roster: keys.iter().map(|k| k.id().clone()).collect(),
    }
}

/// Chain of `data_blocks` data blocks after genesis, authored round-robin.
pub fn build_chain(keys: &[NodeKey], data_blocks: usize) -> Chain {
    let mut chain = genesis_for(keys).chain();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for i in 0..data_blocks {
        let k = &keys[i % keys.len()];
        let tx = make_transaction(
            k,
            TransactionKind::Payload,
            format!("move {i}").into_bytes(),
            None,
            &mut rng,
        )
        .unwrap();
        let b = Block::new(
            chain.height() + 1,
            chain.tip_hash(),
            k.id().clone(),
            i as u64,
            i as u64 * 25,
            BlockKind::Data,
            vec![tx],
        )
        .signed(k);
        chain.append_block(b).unwrap();
    }
    chain
}
