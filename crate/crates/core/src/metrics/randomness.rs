//! Bit-level randomness tests: NIST SP 800-22 frequency (monobit) and runs,
//! plus classical gap and poker tests.

use alloc::vec::Vec;

use super::special::{chi_square_sf, erfc};
use super::MetricsError;
use crate::dab::FrameBuffer;

/// Ordered bits, each stored as 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    /// Expands bytes most-significant bit first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &b in bytes {
            for k in (0..8).rev() {
                bits.push((b >> k) & 1);
            }
        }
        BitStream { bits }
    }

    /// Pixel bytes in channel-planar order, MSB first.
    pub fn from_frame(img: &FrameBuffer) -> Self {
        Self::from_bytes(img.pixels())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        BitStream { bits: bits.into_iter().map(u8::from).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn complement(&self) -> Self {
        BitStream { bits: self.bits.iter().map(|b| b ^ 1).collect() }
    }

    /// Regroups whole bytes, MSB first; trailing bits are dropped.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.chunks_exact(8).map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b)).collect()
    }

    fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

fn require(bits: &BitStream, needed: usize) -> Result<(), MetricsError> {
    if bits.len() < needed {
        return Err(MetricsError::TooFewBits { needed, got: bits.len() });
    }
    Ok(())
}

pub fn monobit_frequency_test(bits: &BitStream) -> Result<f64, MetricsError> {
    require(bits, 100)?;
    let n = bits.len() as f64;
    let s = 2.0 * bits.ones() as f64 - n;
    Ok(erfc(s.abs() / libm::sqrt(2.0 * n)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunsOutcome {
    PValue(f64),
    /// The proportion of ones is too far from ½ for the runs statistic to apply.
    NotApplicable,
}

impl RunsOutcome {
    pub fn p_value(self) -> Option<f64> {
        match self {
            RunsOutcome::PValue(p) => Some(p),
            RunsOutcome::NotApplicable => None,
        }
    }
}

pub fn runs_test(bits: &BitStream) -> Result<RunsOutcome, MetricsError> {
    require(bits, 100)?;
    let n = bits.len() as f64;
    let pi = bits.ones() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / libm::sqrt(n) {
        return Ok(RunsOutcome::NotApplicable);
    }
    let transitions = bits.bits.windows(2).filter(|w| w[0] != w[1]).count();
    let v = transitions as f64 + 1.0;
    let spread = pi * (1.0 - pi);
    let p = erfc((v - 2.0 * n * spread).abs() / (2.0 * libm::sqrt(2.0 * n) * spread));
    Ok(RunsOutcome::PValue(p))
}

/// Gap lengths 0..=9 get their own bin; 10 and longer share the last.
pub const GAP_BINS: usize = 11;
pub const GAP_MIN_BYTES: usize = 4096;

/// Gap test on bytes with target interval `[0, 128)`. A gap is the number of
/// bytes outside the interval before the next byte inside it. Returns the
/// chi-square p-value over the gap-length histogram (10 degrees of freedom);
/// a stream with no completed gaps scores 0.
pub fn gap_test(bits: &BitStream) -> Result<f64, MetricsError> {
    require(bits, GAP_MIN_BYTES * 8)?;
    let mut hist = [0u64; GAP_BINS];
    let mut run = 0usize;
    for b in bits.to_bytes() {
        if b < 128 {
            hist[run.min(GAP_BINS - 1)] += 1;
            run = 0;
        } else {
            run += 1;
        }
    }
    let gaps: u64 = hist.iter().sum();
    if gaps == 0 {
        return Ok(0.0);
    }
    let m = gaps as f64;
    let mut chi = 0.0;
    for (r, &obs) in hist.iter().enumerate() {
        let p = if r < GAP_BINS - 1 { libm::pow(0.5, r as f64 + 1.0) } else { libm::pow(0.5, (GAP_BINS - 1) as f64) };
        let e = m * p;
        chi += (obs as f64 - e) * (obs as f64 - e) / e;
    }
    Ok(chi_square_sf(chi, GAP_BINS - 1))
}

pub const POKER_MIN_BITS: usize = 20_000;

/// Poker test over non-overlapping 4-bit hands, 15 degrees of freedom.
pub fn poker_test(bits: &BitStream) -> Result<f64, MetricsError> {
    require(bits, POKER_MIN_BITS)?;
    let mut freq = [0u64; 16];
    for hand in bits.bits.chunks_exact(4) {
        let v = hand.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        freq[v] += 1;
    }
    let k = (bits.len() / 4) as f64;
    let sum_sq: f64 = freq.iter().map(|&f| (f as f64) * (f as f64)).sum();
    let x = 16.0 / k * sum_sq - k;
    Ok(chi_square_sf(x.max(0.0), 15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_bytes(seed: u64, n: usize) -> Vec<u8> {
        let mut v = vec![0u8; n];
        ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut v);
        v
    }

    #[test]
    fn msb_first_extraction() {
        let b = BitStream::from_bytes(&[0b1000_0001, 0x40]);
        assert_eq!(&b.bits()[..9], &[1, 0, 0, 0, 0, 0, 0, 1, 0]);
        assert_eq!(b.to_bytes(), vec![0x81, 0x40]);
    }

    #[test]
    fn monobit_examples() {
        let balanced = BitStream::from_bits((0..200).map(|i| i % 2 == 0));
        assert_eq!(monobit_frequency_test(&balanced).unwrap(), 1.0);
        let ones = BitStream::from_bits(core::iter::repeat(true).take(100));
        assert!(monobit_frequency_test(&ones).unwrap() < 1e-15);
        assert_eq!(
            monobit_frequency_test(&BitStream::from_bytes(&[0; 12])),
            Err(MetricsError::TooFewBits { needed: 100, got: 96 })
        );
    }

    // SP 800-22 section 2.1.8 / 2.3.8 worked example on the first 100 bits of ε.
    #[test]
    fn nist_worked_examples() {
        let eps = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";
        let b = BitStream::from_bits(eps.bytes().map(|c| c == b'1'));
        assert!((monobit_frequency_test(&b).unwrap() - 0.109_598).abs() < 1e-6);
        let RunsOutcome::PValue(p) = runs_test(&b).unwrap() else { panic!("prerequisite holds") };
        assert!((p - 0.500_798).abs() < 1e-6);
    }

    #[test]
    fn monobit_is_complement_invariant() {
        let b = BitStream::from_bytes(&random_bytes(3, 500));
        assert_eq!(monobit_frequency_test(&b).unwrap(), monobit_frequency_test(&b.complement()).unwrap());
    }

    #[test]
    fn runs_examples() {
        let alternating = BitStream::from_bits((0..1000).map(|i| i % 2 == 1));
        assert!(runs_test(&alternating).unwrap().p_value().unwrap() < 1e-10);
        let ones = BitStream::from_bits(core::iter::repeat(true).take(1000));
        assert_eq!(runs_test(&ones).unwrap(), RunsOutcome::NotApplicable);
    }

    #[test]
    fn runs_on_random_bits() {
        let passes = (0..100)
            .filter(|&s| {
                let b = BitStream::from_bytes(&random_bytes(s, 2000));
                matches!(runs_test(&b).unwrap(), RunsOutcome::PValue(p) if p > 0.01)
            })
            .count();
        assert!(passes >= 98, "{passes}/100");
    }

    #[test]
    fn gap_examples() {
        assert!(gap_test(&BitStream::from_bytes(&[0u8; 4096])).unwrap() < 1e-12);
        assert_eq!(gap_test(&BitStream::from_bytes(&[0xffu8; 4096])).unwrap(), 0.0);
        assert!(matches!(gap_test(&BitStream::from_bytes(&[0u8; 4095])), Err(MetricsError::TooFewBits { .. })));
        let passes = (0..100).filter(|&s| gap_test(&BitStream::from_bytes(&random_bytes(1000 + s, 8192))).unwrap() > 0.01).count();
        assert!(passes >= 98, "{passes}/100");
    }

    #[test]
    fn poker_examples() {
        // every nibble value exactly 2500/16 times is impossible; use 16 × 320 hands
        let hands: Vec<u8> = (0..320).flat_map(|_| (0u8..16).collect::<Vec<_>>()).collect();
        let bytes: Vec<u8> = hands.chunks(2).map(|p| (p[0] << 4) | p[1]).collect();
        let b = BitStream::from_bytes(&bytes);
        assert_eq!(b.len(), 20_480);
        assert_eq!(poker_test(&b).unwrap(), 1.0);
        assert!(poker_test(&BitStream::from_bytes(&[0xaa; 2500])).unwrap() < 1e-12);
        assert!(poker_test(&BitStream::from_bytes(&[0xaa; 2499])).is_err());
        let passes = (0..100).filter(|&s| poker_test(&BitStream::from_bytes(&random_bytes(5000 + s, 4096))).unwrap() > 0.01).count();
        assert!(passes >= 98, "{passes}/100");
    }
}
