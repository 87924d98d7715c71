//! SPRK key files.
//!
//! Layout: `"SPRK"`, u16 version, u16 label length, label bytes, then either
//! a 32-byte private scalar or a 33-byte compressed public point. The key
//! kind is implied by the remaining length.

use std::path::{Path, PathBuf};

use sepris_core::envelope::{KeyPair, PublicKey};

use crate::error::{read, write, FormatError, Reader};

pub const MAGIC: &[u8; 4] = b"SPRK";
pub const VERSION: u16 = 1;
const KIND: &str = "SPRK";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyFile {
    Private(KeyPair),
    Public { label: String, key: PublicKey },
}

impl KeyFile {
    pub fn label(&self) -> &str {
        match self {
            KeyFile::Private(kp) => kp.label(),
            KeyFile::Public { label, .. } => label,
        }
    }

    pub fn public(&self) -> PublicKey {
        match self {
            KeyFile::Private(kp) => kp.public(),
            KeyFile::Public { key, .. } => *key,
        }
    }
}

fn header(label: &str) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(label.len() as u16).to_le_bytes());
    out.extend_from_slice(label.as_bytes());
    out
}

pub fn encode_private(kp: &KeyPair) -> Vec<u8> {
    let mut out = header(kp.label());
    out.extend_from_slice(&kp.private_bytes());
    out
}

pub fn encode_public(label: &str, key: &PublicKey) -> Vec<u8> {
    let mut out = header(label);
    out.extend_from_slice(&key.to_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<KeyFile, FormatError> {
    let mut r = Reader::new(bytes, KIND);
    if r.take(4)? != MAGIC {
        return Err(FormatError::BadMagic(KIND));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { kind: KIND, version });
    }
    let len = usize::from(r.u16()?);
    let label = std::str::from_utf8(r.take(len)?).map_err(|_| FormatError::malformed(KIND, "label is not UTF-8"))?.to_string();
    if label.is_empty() {
        return Err(FormatError::malformed(KIND, "empty label"));
    }
    let key = r.rest();
    let bad = |e: sepris_core::envelope::EnvelopeError| FormatError::malformed(KIND, e.to_string());
    match key.len() {
        32 => Ok(KeyFile::Private(KeyPair::from_private_bytes(&label, key.try_into().expect("32 bytes")).map_err(bad)?)),
        33 => Ok(KeyFile::Public { key: PublicKey::from_bytes(key).map_err(bad)?, label }),
        n if n < 32 => Err(FormatError::Truncated(KIND)),
        n => Err(FormatError::malformed(KIND, format!("{n} trailing key bytes"))),
    }
}

pub fn load(path: &Path) -> Result<KeyFile, FormatError> {
    decode(&read(path)?)
}

/// Paths of the private and public files for `label` inside `dir`.
pub fn paths(dir: &Path, label: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{label}.sprk")), dir.join(format!("{label}.pub.sprk")))
}

pub fn save_pair(dir: &Path, kp: &KeyPair) -> Result<(PathBuf, PathBuf), FormatError> {
    let (private, public) = paths(dir, kp.label());
    write(&private, &encode_private(kp))?;
    write(&public, &encode_public(kp.label(), &kp.public()))?;
    Ok((private, public))
}
