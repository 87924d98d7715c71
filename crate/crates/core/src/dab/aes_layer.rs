//! Selective AES over the 4×4 low-frequency corner of every 8×8 block.
//!
//! Each block's 16 selected coefficients serialize as little-endian i16 into a
//! 32-byte record, which is XORed with two AES-128 blocks of keystream. The
//! counter block for half `h` of block `(bx, by)` in channel `c` is the frame
//! nonce with its low 64 bits XORed by
//! `c << 48 | by << 32 | bx << 16 | h`, so keystream never repeats within a
//! keyset and the layer is its own inverse.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;

use super::frame::{CoefficientPlane, BLOCK};
use super::DabError;

/// Side of the encrypted low-frequency corner.
pub const SELECTED: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CryptDirection {
    Encrypt,
    Decrypt,
}

fn counter_block(nonce: &[u8; 16], channel: usize, by: usize, bx: usize, half: u64) -> [u8; 16] {
    let pos = ((channel as u64) << 48) | ((by as u64) << 32) | ((bx as u64) << 16) | half;
    let mut block = *nonce;
    for (b, p) in block[8..].iter_mut().zip(pos.to_be_bytes()) {
        *b ^= p;
    }
    block
}

/// Applies the keystream to every block of `plane`. Encryption and
/// decryption are the same XOR; `direction` is kept for call-site clarity.
pub fn aes_coeff_layer(
    plane: &CoefficientPlane,
    key: &[u8; 16],
    nonce: &[u8; 16],
    direction: CryptDirection,
) -> Result<CoefficientPlane, DabError> {
    let _ = direction;
    if key.iter().all(|&b| b == 0) {
        return Err(DabError::WeakKey);
    }
    if plane.padded_width % BLOCK != 0 || plane.padded_height % BLOCK != 0 {
        return Err(DabError::Geometry("plane dimensions must be multiples of 8"));
    }
    let cipher = Aes128::new(GenericArray::from_slice(key));
    let mut out = plane.clone();
    for c in 0..plane.channels {
        for by in 0..plane.blocks_y() {
            for bx in 0..plane.blocks_x() {
                let mut ks = [GenericArray::from(counter_block(nonce, c, by, bx, 0)), GenericArray::from(counter_block(nonce, c, by, bx, 1))];
                cipher.encrypt_blocks(&mut ks);
                let mut n = 0;
                for u in 0..SELECTED {
                    let base = out.index(c, bx * BLOCK, by * BLOCK + u);
                    for v in 0..SELECTED {
                        let half = &ks[n / 8];
                        let off = (n % 8) * 2;
                        let mask = i16::from_le_bytes([half[off], half[off + 1]]);
                        out.coefficients[base + v] ^= mask;
                        n += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}
