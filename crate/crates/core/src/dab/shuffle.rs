//! Keyed Fisher–Yates permutation of the 32×32 coefficient tiles.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::frame::{CoefficientPlane, TILE};
use super::{CipherFrame, DabError};
use crate::Digest256;

fn keystream(seed: &[u8; 16], frame_index: u64) -> ChaCha20Rng {
    let d = Digest256::of_parts(&[b"sepris/dab/shuffle/v1", seed, &frame_index.to_le_bytes()]);
    ChaCha20Rng::from_seed(d.0)
}

/// Uniform integer in `0..bound` by rejection, so the swap sequence is
/// unbiased and fixed across platforms.
fn below(rng: &mut ChaCha20Rng, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    let zone = u32::MAX - (u32::MAX % bound);
    loop {
        let r = rng.next_u32();
        if r < zone {
            return r % bound;
        }
    }
}

/// `perm[dst] = src`: output tile `dst` is input tile `perm[dst]`.
pub fn tile_permutation(seed: &[u8; 16], frame_index: u64, tiles: usize) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..tiles as u32).collect();
    let mut rng = keystream(seed, frame_index);
    for i in (1..tiles).rev() {
        let j = below(&mut rng, i as u32 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

pub fn permutation_digest(tiles_x: usize, tiles_y: usize, perm: &[u32]) -> Digest256 {
    let mut bytes = Vec::with_capacity(8 + perm.len() * 4);
    bytes.extend_from_slice(&(tiles_x as u32).to_le_bytes());
    bytes.extend_from_slice(&(tiles_y as u32).to_le_bytes());
    for p in perm {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    Digest256::of_parts(&[b"sepris/dab/perm/v1", &bytes])
}

fn copy_tile(src: &CoefficientPlane, dst: &mut CoefficientPlane, from: usize, to: usize) {
    let tx = src.tiles_x();
    let (sx, sy) = ((from % tx) * TILE, (from / tx) * TILE);
    let (dx, dy) = ((to % tx) * TILE, (to / tx) * TILE);
    for c in 0..src.channels {
        for row in 0..TILE {
            let s = src.index(c, sx, sy + row);
            let d = dst.index(c, dx, dy + row);
            dst.coefficients[d..d + TILE].copy_from_slice(&src.coefficients[s..s + TILE]);
        }
    }
}

fn check_tiled(plane: &CoefficientPlane) -> Result<(), DabError> {
    if plane.padded_width % TILE != 0 || plane.padded_height % TILE != 0 {
        return Err(DabError::Geometry("plane dimensions must be multiples of 32"));
    }
    Ok(())
}

/// Permutes the tile grid of every channel with the same keyed permutation.
/// `quality` is carried into the frame header untouched.
pub fn shuffle_blocks(plane: &CoefficientPlane, seed: &[u8; 16], frame_index: u64, quality: u8) -> Result<CipherFrame, DabError> {
    check_tiled(plane)?;
    let tiles = plane.tiles_x() * plane.tiles_y();
    let perm = tile_permutation(seed, frame_index, tiles);
    let mut out = plane.clone();
    for (dst, &src) in perm.iter().enumerate() {
        copy_tile(plane, &mut out, src as usize, dst);
    }
    Ok(CipherFrame {
        permutation_digest: permutation_digest(plane.tiles_x(), plane.tiles_y(), &perm),
        plane: out,
        quality,
        frame_index,
    })
}

pub fn unshuffle_blocks(cf: &CipherFrame, seed: &[u8; 16]) -> Result<CoefficientPlane, DabError> {
    let plane = &cf.plane;
    check_tiled(plane)?;
    let perm = tile_permutation(seed, cf.frame_index, plane.tiles_x() * plane.tiles_y());
    if permutation_digest(plane.tiles_x(), plane.tiles_y(), &perm) != cf.permutation_digest {
        return Err(DabError::WrongShuffleKey);
    }
    let mut out = plane.clone();
    for (dst, &src) in perm.iter().enumerate() {
        copy_tile(plane, &mut out, dst, src as usize);
    }
    Ok(out)
}
