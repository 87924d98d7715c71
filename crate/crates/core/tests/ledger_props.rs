use proptest::prelude::*;
use sepris_core::envelope::{generate_keypair, KeyDirectory};
use sepris_core::ledger::{genesis, merkle_root, mine_block, validate_chain, Block, BodyKey, Chain, Transaction, TxKind};

fn chain_of(n: usize, difficulty: u8) -> Chain {
    let kp = generate_keypair("SAC_1", b"props").unwrap();
    let mut dir = KeyDirectory::default();
    dir.insert("SAC_1", kp.public()).unwrap();
    let key = [3u8; 32];
    let mut chain = genesis(difficulty);
    for i in 0..n {
        let txs: Vec<Transaction> = (0..=i % 3).map(|j| Transaction::signed(TxKind::AuditRecord, format!("entry {i}/{j}").repeat(40).into_bytes(), &kp)).collect();
        let b = mine_block(&chain, &txs, &dir, BodyKey { id: "k", key: &key }, 1000 + i as u64).unwrap();
        chain.append(b).unwrap();
    }
    chain
}

proptest! {
    #[test]
    fn merkle_root_avalanche(chunks in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..64), 1..12), pick: prop::sample::Index, bit in 0u8..8) {
        let refs: Vec<&[u8]> = chunks.iter().map(Vec::as_slice).collect();
        let root = merkle_root(&refs);
        let mut changed = chunks.clone();
        let i = pick.index(changed.len());
        if changed[i].is_empty() {
            changed[i].push(0);
        } else {
            let j = changed[i].len() / 2;
            changed[i][j] ^= 1 << bit;
        }
        let refs: Vec<&[u8]> = changed.iter().map(Vec::as_slice).collect();
        prop_assert_ne!(merkle_root(&refs), root);
    }
}

#[test]
fn any_byte_flip_breaks_a_small_chain() {
    let chain = chain_of(4, 10);
    assert!(validate_chain(&chain).is_ok());
    let encoded: Vec<Vec<u8>> = chain.blocks.iter().map(Block::to_bytes).collect();
    for (bi, enc) in encoded.iter().enumerate() {
        for pos in (0..enc.len()).step_by(7) {
            let mut bytes = enc.clone();
            bytes[pos] ^= 0x20;
            let Ok(b) = Block::from_bytes(&bytes) else { continue };
            let mut t = chain.clone();
            t.blocks[bi] = b;
            assert!(validate_chain(&t).is_err(), "block {bi} byte {pos}");
        }
    }
}

#[test]
fn pow_mean_is_near_two_to_the_difficulty() {
    use sepris_core::ledger::mine_block_counted;
    let kp = generate_keypair("SAC_1", b"pow").unwrap();
    let mut dir = KeyDirectory::default();
    dir.insert("SAC_1", kp.public()).unwrap();
    let chain = genesis(6);
    let total: u64 = (0..200)
        .map(|i| {
            let tx = Transaction::signed(TxKind::RequestRecord, format!("r{i}").into_bytes(), &kp);
            mine_block_counted(&chain, &[tx], &dir, BodyKey { id: "k", key: &[1; 32] }, i).unwrap().attempts
        })
        .sum();
    let mean = total as f64 / 200.0;
    // Geometric with p = 1/64: sd of the mean is about 4.5.
    assert!((40.0..90.0).contains(&mean), "mean {mean}");
}
