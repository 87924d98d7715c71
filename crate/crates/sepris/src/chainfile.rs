//! Line-delimited JSON chain files.
//!
//! The first line names the format, hash algorithm, difficulty and block
//! count. Each following line is one block: header integers as fixed-width
//! big-endian hex, digests as hex, the body as standard base64. Only the
//! exact text this module writes is accepted back, so any edit to the file
//! is either a parse failure or a changed block.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sepris_core::ledger::{Block, BlockHeader, Chain};
use sepris_core::Digest256;

use crate::error::{read, write, FormatError};

pub const FORMAT: u32 = 1;
pub const HASH_ALGORITHM: &str = "sha256";
const KIND: &str = "chain file";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub format: u32,
    pub hash: String,
    pub difficulty_bits: u8,
    pub blocks: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockLine {
    version: String,
    prev_hash: String,
    timestamp: String,
    nonce: String,
    body_root_hash: String,
    target_hash: String,
    body_key_id: String,
    body: String,
}

impl From<&Block> for BlockLine {
    fn from(b: &Block) -> Self {
        let h = &b.header;
        BlockLine {
            version: hex::encode(h.version.to_be_bytes()),
            prev_hash: h.prev_hash.to_hex(),
            timestamp: hex::encode(h.timestamp.to_be_bytes()),
            nonce: hex::encode(h.nonce.to_be_bytes()),
            body_root_hash: h.body_root_hash.to_hex(),
            target_hash: h.target_hash.to_hex(),
            body_key_id: b.body_key_id.clone(),
            body: STANDARD.encode(&b.body_ciphertext),
        }
    }
}

fn fixed<const N: usize>(s: &str, field: &str) -> Result<[u8; N], String> {
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out).map_err(|e| format!("{field}: {e}"))?;
    Ok(out)
}

fn digest(s: &str, field: &str) -> Result<Digest256, String> {
    Ok(Digest256(fixed::<32>(s, field)?))
}

impl TryFrom<BlockLine> for Block {
    type Error = String;

    fn try_from(l: BlockLine) -> Result<Self, String> {
        Ok(Block {
            header: BlockHeader {
                version: u16::from_be_bytes(fixed(&l.version, "version")?),
                prev_hash: digest(&l.prev_hash, "prev_hash")?,
                timestamp: u64::from_be_bytes(fixed(&l.timestamp, "timestamp")?),
                nonce: u32::from_be_bytes(fixed(&l.nonce, "nonce")?),
                body_root_hash: digest(&l.body_root_hash, "body_root_hash")?,
                target_hash: digest(&l.target_hash, "target_hash")?,
            },
            body_ciphertext: STANDARD.decode(&l.body).map_err(|e| format!("body: {e}"))?,
            body_key_id: l.body_key_id,
        })
    }
}

pub fn to_string(chain: &Chain) -> String {
    let header = FileHeader { format: FORMAT, hash: HASH_ALGORITHM.into(), difficulty_bits: chain.difficulty_bits, blocks: chain.blocks.len() };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for b in &chain.blocks {
        out.push_str(&serde_json::to_string(&BlockLine::from(b)).expect("block serializes"));
        out.push('\n');
    }
    out
}

/// Parses a chain file. Structural validity only; run
/// [`sepris_core::ledger::validate_chain`] on the result to check links,
/// proof of work and Merkle roots.
pub fn from_str(text: &str) -> Result<Chain, FormatError> {
    let body = text.strip_suffix('\n').ok_or_else(|| FormatError::malformed(KIND, "missing final newline"))?;
    let mut lines = body.split('\n');
    let first = lines.next().unwrap_or_default();
    let header: FileHeader = serde_json::from_str(first).map_err(|e| FormatError::malformed(KIND, format!("header line: {e}")))?;
    if header.format != FORMAT {
        return Err(FormatError::UnsupportedVersion { kind: KIND, version: header.format as u16 });
    }
    if header.hash != HASH_ALGORITHM {
        return Err(FormatError::malformed(KIND, format!("unknown hash algorithm {:?}", header.hash)));
    }
    if serde_json::to_string(&header)? != first {
        return Err(FormatError::malformed(KIND, "header line is not in canonical form"));
    }
    let mut blocks = Vec::with_capacity(header.blocks);
    for (index, line) in lines.enumerate() {
        let bad = |reason: String| FormatError::BadBlockLine { index, reason };
        let parsed: BlockLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let block = Block::try_from(parsed).map_err(bad)?;
        if serde_json::to_string(&BlockLine::from(&block)).expect("block serializes") != line {
            return Err(bad("line is not in canonical form".into()));
        }
        blocks.push(block);
    }
    if blocks.len() != header.blocks {
        return Err(FormatError::BadBlockLine { index: blocks.len().min(header.blocks), reason: format!("header announces {} blocks, file holds {}", header.blocks, blocks.len()) });
    }
    Ok(Chain { blocks, difficulty_bits: header.difficulty_bits })
}

pub fn load(path: &Path) -> Result<Chain, FormatError> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| FormatError::malformed(KIND, "not UTF-8"))?;
    from_str(text)
}

pub fn save(path: &Path, chain: &Chain) -> Result<(), FormatError> {
    write(path, to_string(chain).as_bytes())
}
