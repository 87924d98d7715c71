//! Proof-of-work ledger with encrypted bodies.
//!
//! Block bodies are a JSON transaction list sealed with ChaCha20-Poly1305
//! under a node-held body key. The header commits to the *ciphertext* through
//! a Merkle root, so any replica can validate the chain without body keys.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{ChaCha20Poly1305, KeyInit, Nonce};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{KeyDirectory, KeyPair};
use crate::hash::hex_bytes;
use crate::Digest256;

pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 110;
pub const MAX_DIFFICULTY: u8 = 32;
/// Ciphertext is split into chunks of this size for the Merkle tree.
pub const CHUNK: usize = 256;
const NONCE_LEN: usize = 12;

const LEAF: u8 = 0x00;
const NODE: u8 = 0x01;
const TX_DOMAIN: &[u8] = b"sepris/ledger/tx/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("InvalidTransaction: {0}")]
    InvalidTransaction(String),
    #[error("UnknownBodyKey: {0}")]
    UnknownBodyKey(String),
    #[error("AuthTagMismatch: block body failed authentication")]
    AuthTagMismatch,
    #[error("difficulty {0} exceeds the supported maximum of 32 bits")]
    DifficultyTooHigh(u8),
    #[error("malformed block: {0}")]
    Malformed(&'static str),
    #[error("rejected block: {0}")]
    Rejected(BlockFault),
}

/// First failed check when validating a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BlockFault {
    #[error("BadVersion")]
    BadVersion,
    #[error("PrevLinkMismatch")]
    PrevLinkMismatch,
    #[error("TargetMismatch")]
    TargetMismatch,
    #[error("PowInvalid")]
    PowInvalid,
    #[error("MerkleMismatch")]
    MerkleMismatch,
    #[error("TimestampRegression")]
    TimestampRegression,
    #[error("GenesisShape")]
    GenesisShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("block {index}: {fault}")]
pub struct ChainFault {
    pub index: usize,
    pub fault: BlockFault,
}

/// Hash target for `bits` leading zero bits: the largest digest that qualifies.
pub fn target_for(bits: u8) -> Digest256 {
    let mut t = [0xffu8; 32];
    let bits = usize::from(bits);
    for (i, b) in t.iter_mut().enumerate() {
        let lo = i * 8;
        if bits >= lo + 8 {
            *b = 0;
        } else if bits > lo {
            *b = 0xff >> (bits - lo);
        }
    }
    Digest256(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: u16,
    pub prev_hash: Digest256,
    pub timestamp: u64,
    pub nonce: u32,
    pub body_root_hash: Digest256,
    pub target_hash: Digest256,
}

impl BlockHeader {
    /// Canonical little-endian layout, in field order.
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..2].copy_from_slice(&self.version.to_le_bytes());
        out[2..34].copy_from_slice(&self.prev_hash.0);
        out[34..42].copy_from_slice(&self.timestamp.to_le_bytes());
        out[42..46].copy_from_slice(&self.nonce.to_le_bytes());
        out[46..78].copy_from_slice(&self.body_root_hash.0);
        out[78..110].copy_from_slice(&self.target_hash.0);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, LedgerError> {
        if b.len() != HEADER_LEN {
            return Err(LedgerError::Malformed("header must be 110 bytes"));
        }
        let d = |r: core::ops::Range<usize>| Digest256(b[r].try_into().unwrap());
        Ok(BlockHeader {
            version: u16::from_le_bytes([b[0], b[1]]),
            prev_hash: d(2..34),
            timestamp: u64::from_le_bytes(b[34..42].try_into().unwrap()),
            nonce: u32::from_le_bytes(b[42..46].try_into().unwrap()),
            body_root_hash: d(46..78),
            target_hash: d(78..110),
        })
    }

    pub fn hash(&self) -> Digest256 {
        Digest256::of(&self.to_bytes())
    }

    pub fn meets_target(&self) -> bool {
        self.hash() <= self.target_hash
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxKind {
    RequestRecord,
    AuditRecord,
    UserRegistration,
}

impl TxKind {
    fn tag(self) -> u8 {
        match self {
            TxKind::RequestRecord => 1,
            TxKind::AuditRecord => 2,
            TxKind::UserRegistration => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub kind: TxKind,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub submitter_uid: String,
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
}

fn tx_message(kind: TxKind, submitter: &str, payload: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(TX_DOMAIN.len() + 5 + submitter.len() + payload.len());
    m.extend_from_slice(TX_DOMAIN);
    m.push(kind.tag());
    m.extend_from_slice(&(submitter.len() as u32).to_le_bytes());
    m.extend_from_slice(submitter.as_bytes());
    m.extend_from_slice(payload);
    m
}

impl Transaction {
    /// Signs `payload` as `signer`, whose label becomes the submitter id.
    pub fn signed(kind: TxKind, payload: Vec<u8>, signer: &KeyPair) -> Self {
        let signature = signer.sign(&tx_message(kind, signer.label(), &payload)).to_vec();
        Transaction { kind, payload, submitter_uid: signer.label().to_string(), signature }
    }

    pub fn verify(&self, directory: &KeyDirectory) -> Result<(), LedgerError> {
        let key = directory
            .get(&self.submitter_uid)
            .ok_or_else(|| LedgerError::InvalidTransaction(alloc::format!("unregistered submitter {}", self.submitter_uid)))?;
        key.verify(&tx_message(self.kind, &self.submitter_uid, &self.payload), &self.signature)
            .map_err(|_| LedgerError::InvalidTransaction(alloc::format!("bad signature from {}", self.submitter_uid)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    /// `nonce ‖ AEAD ciphertext ‖ tag`; empty for genesis.
    pub body_ciphertext: Vec<u8>,
    pub body_key_id: String,
}

impl Block {
    pub fn hash(&self) -> Digest256 {
        self.header.hash()
    }

    /// Merkle leaves: the body key id, then 256-byte ciphertext chunks.
    pub fn body_chunks(&self) -> Vec<&[u8]> {
        let mut chunks = Vec::with_capacity(1 + self.body_ciphertext.len() / CHUNK + 1);
        chunks.push(self.body_key_id.as_bytes());
        chunks.extend(self.body_ciphertext.chunks(CHUNK));
        chunks
    }

    pub fn computed_root(&self) -> Digest256 {
        merkle_root(&self.body_chunks())
    }

    /// Header, then `u16` key id length + key id, then `u32` body length + body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 6 + self.body_key_id.len() + self.body_ciphertext.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&(self.body_key_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.body_key_id.as_bytes());
        out.extend_from_slice(&(self.body_ciphertext.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.body_ciphertext);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, LedgerError> {
        let short = LedgerError::Malformed("truncated block");
        let header = BlockHeader::from_bytes(b.get(..HEADER_LEN).ok_or(short.clone())?)?;
        let mut at = HEADER_LEN;
        let klen = usize::from(u16::from_le_bytes(b.get(at..at + 2).ok_or(short.clone())?.try_into().unwrap()));
        at += 2;
        let key = b.get(at..at + klen).ok_or(short.clone())?;
        let body_key_id = core::str::from_utf8(key).map_err(|_| LedgerError::Malformed("key id is not UTF-8"))?.to_string();
        at += klen;
        let blen = u32::from_le_bytes(b.get(at..at + 4).ok_or(short.clone())?.try_into().unwrap()) as usize;
        at += 4;
        let body = b.get(at..at + blen).ok_or(short)?.to_vec();
        if at + blen != b.len() {
            return Err(LedgerError::Malformed("trailing bytes"));
        }
        Ok(Block { header, body_ciphertext: body, body_key_id })
    }
}

/// Binary Merkle tree with 0x00 leaf / 0x01 node prefixes. An odd node at
/// any level is paired with itself, and the root always sits above at least
/// one combining level, so one chunk gives `H(1 ‖ L ‖ L)`.
pub fn merkle_root(chunks: &[&[u8]]) -> Digest256 {
    if chunks.is_empty() {
        return Digest256::of(&[LEAF]);
    }
    let mut level: Vec<Digest256> = chunks.iter().map(|c| Digest256::of_parts(&[&[LEAF], c])).collect();
    loop {
        level = level
            .chunks(2)
            .map(|p| {
                let r = p.get(1).unwrap_or(&p[0]);
                Digest256::of_parts(&[&[NODE], &p[0].0, &r.0])
            })
            .collect();
        if level.len() == 1 {
            return level[0];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub blocks: Vec<Block>,
    pub difficulty_bits: u8,
}

/// Genesis timestamp used by [`genesis`].
pub const GENESIS_TIME: u64 = 0;

pub fn genesis(difficulty_bits: u8) -> Chain {
    genesis_at(difficulty_bits, GENESIS_TIME).expect("difficulty within range")
}

pub fn genesis_at(difficulty_bits: u8, timestamp: u64) -> Result<Chain, LedgerError> {
    if difficulty_bits > MAX_DIFFICULTY {
        return Err(LedgerError::DifficultyTooHigh(difficulty_bits));
    }
    let mut block = Block {
        header: BlockHeader {
            version: VERSION,
            prev_hash: Digest256::ZERO,
            timestamp,
            nonce: 0,
            body_root_hash: Digest256::ZERO,
            target_hash: target_for(difficulty_bits),
        },
        body_ciphertext: Vec::new(),
        body_key_id: String::new(),
    };
    block.header.body_root_hash = block.computed_root();
    search_nonce(&mut block.header);
    Ok(Chain { blocks: alloc::vec![block], difficulty_bits })
}

/// Lowest qualifying nonce, bumping the timestamp when the nonce space runs
/// out. Returns the number of header hashes tried.
fn search_nonce(h: &mut BlockHeader) -> u64 {
    let mut attempts = 0u64;
    loop {
        for nonce in 0..=u32::MAX {
            h.nonce = nonce;
            attempts += 1;
            if h.meets_target() {
                return attempts;
            }
        }
        h.timestamp += 1;
    }
}

/// Body keys held by a node, by id.
#[derive(Clone, Default)]
pub struct BodyKeyStore {
    keys: BTreeMap<String, [u8; 32]>,
}

impl core::fmt::Debug for BodyKeyStore {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_set().entries(self.keys.keys()).finish()
    }
}

impl BodyKeyStore {
    pub fn insert(&mut self, id: &str, key: [u8; 32]) {
        self.keys.insert(id.to_string(), key);
    }

    pub fn get(&self, id: &str) -> Option<&[u8; 32]> {
        self.keys.get(id)
    }
}

fn body_aad(key_id: &str) -> Vec<u8> {
    let mut a = b"sepris/ledger/body/v1".to_vec();
    a.extend_from_slice(key_id.as_bytes());
    a
}

fn seal_body(prev: &Digest256, timestamp: u64, key: &[u8; 32], key_id: &str, plaintext: &[u8]) -> Vec<u8> {
    // Deterministic nonce: replays with a pinned clock give identical blocks,
    // and distinct (prev, time, body) never share one.
    let n = Digest256::of_parts(&[b"sepris/ledger/nonce/v1", &prev.0, &timestamp.to_le_bytes(), plaintext]);
    let nonce = Nonce::from_slice(&n.0[..NONCE_LEN]);
    let ct = ChaCha20Poly1305::new(key.into())
        .encrypt(nonce, Payload { msg: plaintext, aad: &body_aad(key_id) })
        .expect("body within AEAD limits");
    let mut out = Vec::with_capacity(NONCE_LEN + ct.len());
    out.extend_from_slice(nonce);
    out.extend_from_slice(&ct);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mined {
    pub block: Block,
    pub attempts: u64,
}

/// Everything the miner needs besides the chain and transactions.
#[derive(Clone, Copy, Debug)]
pub struct BodyKey<'a> {
    pub id: &'a str,
    pub key: &'a [u8; 32],
}

pub fn mine_block(chain: &Chain, txs: &[Transaction], directory: &KeyDirectory, body_key: BodyKey<'_>, clock: u64) -> Result<Block, LedgerError> {
    mine_block_counted(chain, txs, directory, body_key, clock).map(|m| m.block)
}

pub fn mine_block_counted(
    chain: &Chain,
    txs: &[Transaction],
    directory: &KeyDirectory,
    body_key: BodyKey<'_>,
    clock: u64,
) -> Result<Mined, LedgerError> {
    if chain.difficulty_bits > MAX_DIFFICULTY {
        return Err(LedgerError::DifficultyTooHigh(chain.difficulty_bits));
    }
    for tx in txs {
        tx.verify(directory)?;
    }
    let prev = chain.tip().ok_or(LedgerError::Malformed("chain has no genesis"))?;
    let prev_hash = prev.hash();
    let timestamp = clock.max(prev.header.timestamp);
    let plaintext = serde_json::to_vec(txs).expect("transactions serialize");
    let mut block = Block {
        header: BlockHeader {
            version: VERSION,
            prev_hash,
            timestamp,
            nonce: 0,
            body_root_hash: Digest256::ZERO,
            target_hash: target_for(chain.difficulty_bits),
        },
        body_ciphertext: seal_body(&prev_hash, timestamp, body_key.key, body_key.id, &plaintext),
        body_key_id: body_key.id.to_string(),
    };
    block.header.body_root_hash = block.computed_root();
    let attempts = search_nonce(&mut block.header);
    Ok(Mined { block, attempts })
}

fn check_self(block: &Block, difficulty_bits: u8) -> Result<(), BlockFault> {
    if block.header.version != VERSION {
        return Err(BlockFault::BadVersion);
    }
    if block.header.target_hash != target_for(difficulty_bits) {
        return Err(BlockFault::TargetMismatch);
    }
    if !block.header.meets_target() {
        return Err(BlockFault::PowInvalid);
    }
    if block.computed_root() != block.header.body_root_hash {
        return Err(BlockFault::MerkleMismatch);
    }
    Ok(())
}

/// Checks `candidate` as the successor of `prev`. Body keys are never needed.
pub fn validate_block(prev: &Block, candidate: &Block, difficulty_bits: u8) -> Result<(), BlockFault> {
    if candidate.header.version != VERSION {
        return Err(BlockFault::BadVersion);
    }
    if candidate.header.prev_hash != prev.hash() {
        return Err(BlockFault::PrevLinkMismatch);
    }
    check_self(candidate, difficulty_bits)?;
    if candidate.header.timestamp < prev.header.timestamp {
        return Err(BlockFault::TimestampRegression);
    }
    Ok(())
}

pub fn validate_genesis(block: &Block, difficulty_bits: u8) -> Result<(), BlockFault> {
    if block.header.prev_hash != Digest256::ZERO || !block.body_ciphertext.is_empty() || !block.body_key_id.is_empty() {
        return Err(BlockFault::GenesisShape);
    }
    check_self(block, difficulty_bits)
}

pub fn validate_chain(chain: &Chain) -> Result<(), ChainFault> {
    let first = chain.blocks.first().ok_or(ChainFault { index: 0, fault: BlockFault::GenesisShape })?;
    validate_genesis(first, chain.difficulty_bits).map_err(|fault| ChainFault { index: 0, fault })?;
    for (i, pair) in chain.blocks.windows(2).enumerate() {
        validate_block(&pair[0], &pair[1], chain.difficulty_bits).map_err(|fault| ChainFault { index: i + 1, fault })?;
    }
    Ok(())
}

impl Chain {
    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn height(&self) -> usize {
        self.blocks.len()
    }

    /// Validates `block` against the tip and appends it.
    pub fn append(&mut self, block: Block) -> Result<(), LedgerError> {
        let tip = self.tip().ok_or(LedgerError::Malformed("chain has no genesis"))?;
        validate_block(tip, &block, self.difficulty_bits).map_err(LedgerError::Rejected)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Concatenated block encodings, used to compare replicas byte for byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = alloc::vec![self.difficulty_bits];
        for b in &self.blocks {
            let enc = b.to_bytes();
            out.extend_from_slice(&(enc.len() as u32).to_le_bytes());
            out.extend_from_slice(&enc);
        }
        out
    }
}

pub fn decrypt_body(block: &Block, keystore: &BodyKeyStore) -> Result<Vec<Transaction>, LedgerError> {
    if block.body_ciphertext.is_empty() && block.body_key_id.is_empty() {
        return Ok(Vec::new());
    }
    let key = keystore.get(&block.body_key_id).ok_or_else(|| LedgerError::UnknownBodyKey(block.body_key_id.clone()))?;
    if block.body_ciphertext.len() < NONCE_LEN {
        return Err(LedgerError::AuthTagMismatch);
    }
    let (nonce, ct) = block.body_ciphertext.split_at(NONCE_LEN);
    let plain = ChaCha20Poly1305::new(key.into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad: &body_aad(&block.body_key_id) })
        .map_err(|_| LedgerError::AuthTagMismatch)?;
    serde_json::from_slice(&plain).map_err(|_| LedgerError::Malformed("body is not a transaction list"))
}
