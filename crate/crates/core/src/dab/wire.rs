//! Byte layout of a cipher frame (`SPRC`) and of a served stream of them.
//!
//! ```text
//! "SPRC" | u16 version | u16 orig_w | u16 orig_h | u16 pad_w | u16 pad_h
//!        | u8 channels | u8 quality | u64 frame_index | [u8; 32] digest
//!        | i16 coefficients, channel-planar row-major
//! ```
//!
//! All integers little-endian. A stream is a sequence of `u32` length-prefixed
//! records.

use alloc::vec::Vec;

use super::{CipherFrame, CoefficientPlane, DabError};
use crate::Digest256;

pub const MAGIC: &[u8; 4] = b"SPRC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 2 * 4 + 1 + 1 + 8 + 32;

pub fn encode(cf: &CipherFrame) -> Vec<u8> {
    let p = &cf.plane;
    let mut out = Vec::with_capacity(HEADER_LEN + p.coefficients().len() * 2);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [p.original_width(), p.original_height(), p.padded_width(), p.padded_height()] {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    out.push(p.channels() as u8);
    out.push(cf.quality);
    out.extend_from_slice(&cf.frame_index.to_le_bytes());
    out.extend_from_slice(cf.permutation_digest.as_bytes());
    for c in p.coefficients() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> usize {
    usize::from(u16::from_le_bytes([b[at], b[at + 1]]))
}

pub fn decode(bytes: &[u8]) -> Result<CipherFrame, DabError> {
    if bytes.len() < HEADER_LEN {
        return Err(DabError::Malformed("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(DabError::Malformed("bad magic"));
    }
    if u16_at(bytes, 4) != usize::from(VERSION) {
        return Err(DabError::Malformed("unsupported version"));
    }
    let (ow, oh, pw, ph) = (u16_at(bytes, 6), u16_at(bytes, 8), u16_at(bytes, 10), u16_at(bytes, 12));
    let channels = usize::from(bytes[14]);
    let quality = bytes[15];
    let frame_index = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let digest = Digest256(bytes[24..56].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if body.len() != pw * ph * channels * 2 {
        return Err(DabError::Malformed("coefficient payload length mismatch"));
    }
    let coeffs = body.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    let plane = CoefficientPlane::new(pw, ph, ow, oh, channels, coeffs)?;
    super::quant_matrix(quality)?;
    Ok(CipherFrame { plane, quality, frame_index, permutation_digest: digest })
}

pub fn encode_stream<'a>(frames: impl IntoIterator<Item = &'a CipherFrame>) -> Vec<u8> {
    let mut out = Vec::new();
    for cf in frames {
        let rec = encode(cf);
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(&rec);
    }
    out
}

pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<CipherFrame>, DabError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 4 {
            return Err(DabError::Malformed("truncated record length"));
        }
        let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let rest = &bytes[4..];
        if rest.len() < n {
            return Err(DabError::Malformed("truncated record"));
        }
        out.push(decode(&rest[..n])?);
        bytes = &rest[n..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dab::{encipher_frame, DabKeyset};
    use crate::synth;

    fn sample() -> CipherFrame {
        let keys = DabKeyset::new([3; 16], [4; 16], 75, 9).unwrap();
        encipher_frame(&synth::natural_image(40, 33, 3, 2), &keys, 6).unwrap()
    }

    #[test]
    fn header_layout() {
        let cf = sample();
        let b = encode(&cf);
        assert_eq!(&b[..4], b"SPRC");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..14], &[40, 0, 33, 0, 64, 0, 64, 0]);
        assert_eq!(&b[14..16], &[3, 75]);
        assert_eq!(&b[16..24], &6u64.to_le_bytes());
        assert_eq!(&b[24..56], cf.permutation_digest.as_bytes());
        assert_eq!(b.len(), 56 + 64 * 64 * 3 * 2);
        assert_eq!(decode(&b).unwrap(), cf);
    }

    #[test]
    fn stream_round_trip_and_truncation() {
        let cf = sample();
        let s = encode_stream([&cf, &cf]);
        assert_eq!(decode_stream(&s).unwrap(), alloc::vec![cf.clone(), cf]);
        assert!(decode_stream(&s[..s.len() - 1]).is_err());
        assert!(decode(&s[4..60]).is_err());
    }
}
