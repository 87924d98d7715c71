//! Allocation-only core of SePriS, a permissioned-blockchain access-control
//! network for stored surveillance video.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It contains:
//!
//! - [`dab`]: the DCT / quantization / selective AES / block-shuffle frame
//!   cipher and its exact inverse.
//! - [`metrics`]: the statistical security battery run against cipher frames.
//! - [`envelope`]: sign-then-encrypt envelopes over P-256 identity keys.
//! - [`ledger`]: proof-of-work blocks with encrypted bodies and Merkle roots.
//! - [`contract`]: UID issuance, ACL evaluation, and single-use access codes.
//! - [`storage`]: the off-chain video site that serves enciphered frames.
//! - [`network`]: a deterministic simulation of the ten-step request protocol.
//!
//! File formats, key files and the command-line tool live in the `sepris`
//! crate, which builds on this one.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod contract;
pub mod dab;
pub mod envelope;
pub mod hash;
pub mod ledger;
pub mod metrics;
pub mod network;
pub mod storage;
pub mod synth;

pub use hash::Digest256;
