use alloc::vec::Vec;

use super::{reconstruct_samples, CipherFrame, DabError, FrameBuffer};

/// Renders a cipher frame as an 8-bit image by decoding it as if it were an
/// ordinary quantized plane (dequantize, inverse DCT, round) and keeping the
/// low byte of each sample instead of clamping.
///
/// This is what a decoder without the keys would display. Every output pixel
/// mixes all 64 coefficients of its block, so the encrypted corner dominates
/// the picture. An all-zero plane renders as an all-zero image.
pub fn cipher_visualization(cf: &CipherFrame) -> Result<FrameBuffer, DabError> {
    let samples = reconstruct_samples(&cf.plane, cf.quality)?;
    let pixels = samples.iter().map(|&v| (libm::round(v) as i64).rem_euclid(256) as u8).collect();
    FrameBuffer::new(cf.plane.padded_width(), cf.plane.padded_height(), cf.plane.channels(), pixels)
}

/// Raw byte view of the coefficient plane: the low byte of each coefficient,
/// in plane order.
pub fn coefficient_low_bytes(cf: &CipherFrame) -> Result<FrameBuffer, DabError> {
    let pixels: Vec<u8> = cf.plane.coefficients().iter().map(|&c| c as u8).collect();
    FrameBuffer::new(cf.plane.padded_width(), cf.plane.padded_height(), cf.plane.channels(), pixels)
}
