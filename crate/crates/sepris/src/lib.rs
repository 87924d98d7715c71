//! File formats and the command-line front end for [`sepris_core`].
//!
//! | file | module |
//! |------|--------|
//! | PGM/PPM images | [`pnm`] |
//! | SPRK key files | [`keyfile`] |
//! | SPRS video containers | [`video`] |
//! | keyset JSON | [`keyset`] |
//! | chain JSONL | [`chainfile`] |
//!
//! SPRC cipher frames and envelopes are encoded by the core crate.

#![forbid(unsafe_code)]

pub mod chainfile;
pub mod cli;
mod error;
pub mod keyfile;
pub mod keyset;
pub mod pnm;
pub mod video;

pub use error::FormatError;
