//! Sign-then-encrypt envelopes ("double lock-box") over P-256 identity keys.
//!
//! The sender signs `recipient fingerprint ‖ payload` with ECDSA, then seals
//! `payload ‖ signature ‖ sender label` to the recipient with ephemeral ECDH,
//! HKDF-SHA256 and ChaCha20-Poly1305. Only the recipient fingerprint and the
//! ephemeral public point travel in the clear.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chacha20poly1305::aead::AeadInPlace;
use chacha20poly1305::{ChaCha20Poly1305, KeyInit, Nonce, Tag};
use hkdf::Hkdf;
use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::{Signature, SigningKey, VerifyingKey};
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::NonZeroScalar;
use rand_core::CryptoRngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;
use thiserror::Error;

use crate::Digest256;

const SIG_DOMAIN: &[u8] = b"sepris/envelope/sig/v1";
const KDF_INFO: &[u8] = b"sepris/envelope/kdf/v1";
const SIG_LEN: usize = 64;
const POINT_LEN: usize = 33;
const TAG_LEN: usize = 16;
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("EntropyError: key seed must be nonempty")]
    EntropyError,
    #[error("payload must be nonempty and at most 1 MiB")]
    PayloadSize,
    #[error("WrongRecipient: envelope is addressed to another key")]
    WrongRecipient,
    #[error("AuthTagMismatch: ciphertext failed authentication")]
    AuthTagMismatch,
    #[error("SignatureInvalid: sender signature does not verify")]
    SignatureInvalid,
    #[error("malformed envelope: {0}")]
    Malformed(&'static str),
    #[error("invalid key encoding")]
    InvalidKey,
    #[error("DuplicateLabel: {0}")]
    DuplicateLabel(String),
}

/// A public identity key (P-256 point).
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(p256::PublicKey);

impl PublicKey {
    /// Compressed SEC1 encoding.
    pub fn to_bytes(&self) -> [u8; POINT_LEN] {
        let ep = self.0.to_encoded_point(true);
        let mut out = [0u8; POINT_LEN];
        out.copy_from_slice(ep.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        p256::PublicKey::from_sec1_bytes(bytes).map(PublicKey).map_err(|_| EnvelopeError::InvalidKey)
    }

    pub fn fingerprint(&self) -> Digest256 {
        Digest256::of_parts(&[b"sepris/fingerprint/v1", &self.to_bytes()])
    }

    /// Checks a detached signature made with [`KeyPair::sign`].
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> Result<(), EnvelopeError> {
        let sig = Signature::from_slice(signature).map_err(|_| EnvelopeError::SignatureInvalid)?;
        VerifyingKey::from(&self.0).verify(message, &sig).map_err(|_| EnvelopeError::SignatureInvalid)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.to_bytes()))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(s).map_err(serde::de::Error::custom)?;
        PublicKey::from_bytes(&raw).map_err(serde::de::Error::custom)
    }
}

/// A labelled identity: private scalar plus its public point.
#[derive(Clone)]
pub struct KeyPair {
    secret: p256::SecretKey,
    public: PublicKey,
    label: String,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("label", &self.label).field("public", &self.public).finish_non_exhaustive()
    }
}

/// The public point is a function of the secret, so comparing it suffices.
impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.public == other.public
    }
}

impl Eq for KeyPair {}

impl KeyPair {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn private_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    pub fn from_private_bytes(label: &str, bytes: &[u8; 32]) -> Result<Self, EnvelopeError> {
        let secret = p256::SecretKey::from_bytes(bytes.into()).map_err(|_| EnvelopeError::InvalidKey)?;
        let public = PublicKey(secret.public_key());
        Ok(KeyPair { secret, public, label: label.to_string() })
    }

    fn signing_key(&self) -> SigningKey {
        SigningKey::from(&self.secret)
    }

    /// Detached ECDSA signature; callers supply their own domain prefix.
    pub fn sign(&self, message: &[u8]) -> [u8; SIG_LEN] {
        let sig: Signature = self.signing_key().sign(message);
        sig.to_bytes().into()
    }
}

/// Derives a key pair from `seed`; the same seed always yields the same pair.
pub fn generate_keypair(label: &str, seed: &[u8]) -> Result<KeyPair, EnvelopeError> {
    if seed.is_empty() {
        return Err(EnvelopeError::EntropyError);
    }
    for counter in 0u32.. {
        let d = Digest256::of_parts(&[b"sepris/keygen/v1", &counter.to_le_bytes(), seed]);
        if let Ok(kp) = KeyPair::from_private_bytes(label, &d.0) {
            return Ok(kp);
        }
    }
    unreachable!("a valid scalar is found with overwhelming probability")
}

/// Public keys by identity label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyDirectory {
    keys: BTreeMap<String, PublicKey>,
}

impl KeyDirectory {
    pub fn insert(&mut self, label: &str, key: PublicKey) -> Result<(), EnvelopeError> {
        if self.keys.contains_key(label) {
            return Err(EnvelopeError::DuplicateLabel(label.to_string()));
        }
        self.keys.insert(label.to_string(), key);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<PublicKey> {
        self.keys.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.keys.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Envelope {
    pub recipient_hint: Digest256,
    pub encapsulation: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub auth_tag: Vec<u8>,
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Envelope")
            .field("recipient_hint", &self.recipient_hint)
            .field("ciphertext_len", &self.ciphertext.len())
            .finish_non_exhaustive()
    }
}

impl Envelope {
    /// `u32` little-endian length prefix before each of the four fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 32 + self.encapsulation.len() + self.ciphertext.len() + self.auth_tag.len());
        for field in [&self.recipient_hint.0[..], &self.encapsulation, &self.ciphertext, &self.auth_tag] {
            out.extend_from_slice(&(field.len() as u32).to_le_bytes());
            out.extend_from_slice(field);
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let mut fields: [Vec<u8>; 4] = Default::default();
        for f in fields.iter_mut() {
            if bytes.len() < 4 {
                return Err(EnvelopeError::Malformed("truncated length prefix"));
            }
            let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
            bytes = &bytes[4..];
            if bytes.len() < n {
                return Err(EnvelopeError::Malformed("truncated field"));
            }
            *f = bytes[..n].to_vec();
            bytes = &bytes[n..];
        }
        if !bytes.is_empty() {
            return Err(EnvelopeError::Malformed("trailing bytes"));
        }
        let [hint, encapsulation, ciphertext, auth_tag] = fields;
        let hint: [u8; 32] = hint.try_into().map_err(|_| EnvelopeError::Malformed("recipient hint must be 32 bytes"))?;
        Ok(Envelope { recipient_hint: Digest256(hint), encapsulation, ciphertext, auth_tag })
    }

    pub fn digest(&self) -> Digest256 {
        Digest256::of(&self.to_bytes())
    }
}

fn signed_message(recipient: &Digest256, payload: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(SIG_DOMAIN.len() + 32 + payload.len());
    m.extend_from_slice(SIG_DOMAIN);
    m.extend_from_slice(&recipient.0);
    m.extend_from_slice(payload);
    m
}

fn aead_for(shared: &[u8], eph: &[u8], recipient: &PublicKey) -> (ChaCha20Poly1305, Nonce) {
    let mut salt = Vec::with_capacity(2 * POINT_LEN);
    salt.extend_from_slice(eph);
    salt.extend_from_slice(&recipient.to_bytes());
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 44];
    hk.expand(KDF_INFO, &mut okm).expect("44 bytes is a valid HKDF-SHA256 length");
    let cipher = ChaCha20Poly1305::new_from_slice(&okm[..32]).expect("32-byte key");
    (cipher, *Nonce::from_slice(&okm[32..]))
}

fn aad(hint: &Digest256, eph: &[u8]) -> Vec<u8> {
    let mut a = Vec::with_capacity(32 + eph.len());
    a.extend_from_slice(&hint.0);
    a.extend_from_slice(eph);
    a
}

/// Encrypts an already-assembled inner plaintext to `receiver`.
fn seal_inner(receiver: &PublicKey, mut inner: Vec<u8>, rng: &mut impl CryptoRngCore) -> Envelope {
    let eph_secret = NonZeroScalar::random(rng);
    let eph_public = PublicKey(p256::PublicKey::from_secret_scalar(&eph_secret));
    let eph_bytes = eph_public.to_bytes();
    let shared = p256::ecdh::diffie_hellman(eph_secret, receiver.0.as_affine());
    let (cipher, nonce) = aead_for(shared.raw_secret_bytes(), &eph_bytes, receiver);
    let hint = receiver.fingerprint();
    let tag = cipher.encrypt_in_place_detached(&nonce, &aad(&hint, &eph_bytes), &mut inner).expect("payload within AEAD limits");
    Envelope { recipient_hint: hint, encapsulation: eph_bytes.to_vec(), ciphertext: inner, auth_tag: tag.to_vec() }
}

fn inner_plaintext(payload: &[u8], signature: &[u8; SIG_LEN], sender_label: &str) -> Vec<u8> {
    let mut inner = Vec::with_capacity(4 + payload.len() + SIG_LEN + 2 + sender_label.len());
    inner.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    inner.extend_from_slice(payload);
    inner.extend_from_slice(signature);
    inner.extend_from_slice(&(sender_label.len() as u16).to_le_bytes());
    inner.extend_from_slice(sender_label.as_bytes());
    inner
}

fn sign_for(sender: &KeyPair, recipient: &Digest256, payload: &[u8]) -> [u8; SIG_LEN] {
    sender.sign(&signed_message(recipient, payload))
}

pub fn seal(sender: &KeyPair, receiver_pub: &PublicKey, payload: &[u8], rng: &mut impl CryptoRngCore) -> Result<Envelope, EnvelopeError> {
    if payload.is_empty() || payload.len() > MAX_PAYLOAD {
        return Err(EnvelopeError::PayloadSize);
    }
    let sig = sign_for(sender, &receiver_pub.fingerprint(), payload);
    Ok(seal_inner(receiver_pub, inner_plaintext(payload, &sig, &sender.label), rng))
}

/// A decrypted, signature-checked envelope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opened {
    pub payload: Vec<u8>,
    pub sender_label: String,
}

struct Inner {
    payload: Vec<u8>,
    signature: [u8; SIG_LEN],
    label: String,
}

fn take(buf: &[u8], at: usize, n: usize) -> Result<&[u8], EnvelopeError> {
    buf.get(at..at + n).ok_or(EnvelopeError::Malformed("inner layout"))
}

fn decrypt(receiver: &KeyPair, env: &Envelope) -> Result<Inner, EnvelopeError> {
    if env.recipient_hint != receiver.public.fingerprint() {
        return Err(EnvelopeError::WrongRecipient);
    }
    if env.auth_tag.len() != TAG_LEN {
        return Err(EnvelopeError::AuthTagMismatch);
    }
    let eph = PublicKey::from_bytes(&env.encapsulation).map_err(|_| EnvelopeError::Malformed("bad encapsulation point"))?;
    let shared = p256::ecdh::diffie_hellman(receiver.secret.to_nonzero_scalar(), eph.0.as_affine());
    let (cipher, nonce) = aead_for(shared.raw_secret_bytes(), &env.encapsulation, &receiver.public);
    let mut buf = env.ciphertext.clone();
    cipher
        .decrypt_in_place_detached(&nonce, &aad(&env.recipient_hint, &env.encapsulation), &mut buf, Tag::from_slice(&env.auth_tag))
        .map_err(|_| EnvelopeError::AuthTagMismatch)?;

    // Authenticated from here on, so malformed means a buggy sender.
    let plen = u32::from_le_bytes(take(&buf, 0, 4)?.try_into().unwrap()) as usize;
    let payload = take(&buf, 4, plen)?.to_vec();
    let signature: [u8; SIG_LEN] = take(&buf, 4 + plen, SIG_LEN)?.try_into().unwrap();
    let at = 4 + plen + SIG_LEN;
    let llen = usize::from(u16::from_le_bytes(take(&buf, at, 2)?.try_into().unwrap()));
    let label = core::str::from_utf8(take(&buf, at + 2, llen)?).map_err(|_| EnvelopeError::Malformed("sender label"))?.to_string();
    if at + 2 + llen != buf.len() {
        return Err(EnvelopeError::Malformed("inner layout"));
    }
    Ok(Inner { payload, signature, label })
}

fn verify(sender_pub: &PublicKey, recipient: &Digest256, inner: &Inner) -> Result<(), EnvelopeError> {
    sender_pub.verify(&signed_message(recipient, &inner.payload), &inner.signature)
}

/// Opens an envelope expected from a specific sender.
pub fn open(receiver: &KeyPair, expected_sender_pub: &PublicKey, env: &Envelope) -> Result<Vec<u8>, EnvelopeError> {
    let inner = decrypt(receiver, env)?;
    verify(expected_sender_pub, &env.recipient_hint, &inner)?;
    Ok(inner.payload)
}

/// Opens an envelope from any sender in `directory`, looked up by the label
/// carried inside the ciphertext.
pub fn open_from(receiver: &KeyPair, directory: &KeyDirectory, env: &Envelope) -> Result<Opened, EnvelopeError> {
    let inner = decrypt(receiver, env)?;
    let key = directory.get(&inner.label).ok_or(EnvelopeError::SignatureInvalid)?;
    verify(&key, &env.recipient_hint, &inner)?;
    Ok(Opened { payload: inner.payload, sender_label: inner.label })
}
