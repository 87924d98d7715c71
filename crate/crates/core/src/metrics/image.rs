use core::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dab::FrameBuffer;

fn same_dims(a: &FrameBuffer, b: &FrameBuffer) -> Result<(), MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::DimensionMismatch);
    }
    Ok(())
}

/// Fraction of positions whose values differ.
pub fn encryption_quality(plain: &FrameBuffer, cipher: &FrameBuffer) -> Result<f64, MetricsError> {
    same_dims(plain, cipher)?;
    let differ = plain.pixels().iter().zip(cipher.pixels()).filter(|(a, b)| a != b).count();
    Ok(differ as f64 / plain.pixels().len() as f64)
}

pub fn npcr(c1: &FrameBuffer, c2: &FrameBuffer) -> Result<f64, MetricsError> {
    Ok(100.0 * encryption_quality(c1, c2)?)
}

pub fn uaci(c1: &FrameBuffer, c2: &FrameBuffer) -> Result<f64, MetricsError> {
    same_dims(c1, c2)?;
    let total: u64 = c1.pixels().iter().zip(c2.pixels()).map(|(a, b)| u64::from(a.abs_diff(*b))).sum();
    Ok(100.0 * total as f64 / (255.0 * c1.pixels().len() as f64))
}

/// Peak signal-to-noise ratio; identical images have no finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Db(f64),
    Infinite,
}

impl Psnr {
    pub fn db(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v:.2} dB"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Psnr::Db(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(alloc::string::String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Psnr::Db(v)),
            Raw::Text(t) if t == "inf" => Ok(Psnr::Infinite),
            Raw::Text(_) => Err(serde::de::Error::custom("expected a number or \"inf\"")),
        }
    }
}

pub fn psnr(reference: &FrameBuffer, test: &FrameBuffer) -> Result<Psnr, MetricsError> {
    same_dims(reference, test)?;
    let sse: u64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| {
            let d = u64::from(a.abs_diff(*b));
            d * d
        })
        .sum();
    if sse == 0 {
        return Ok(Psnr::Infinite);
    }
    let mse = sse as f64 / reference.pixels().len() as f64;
    Ok(Psnr::Db(10.0 * libm::log10(255.0 * 255.0 / mse)))
}

/// Shannon entropy of the 256-bin intensity histogram, in bits per pixel.
pub fn entropy(img: &FrameBuffer) -> Result<f64, MetricsError> {
    let px = img.pixels();
    if px.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut hist = [0u64; 256];
    for &p in px {
        hist[usize::from(p)] += 1;
    }
    let n = px.len() as f64;
    Ok(hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Horizontal,
    Vertical,
    Diagonal,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Horizontal, Direction::Vertical, Direction::Diagonal];

    fn offset(self) -> (usize, usize) {
        match self {
            Direction::Horizontal => (1, 0),
            Direction::Vertical => (0, 1),
            Direction::Diagonal => (1, 1),
        }
    }
}

fn below(rng: &mut ChaCha20Rng, bound: usize) -> usize {
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let r = rng.next_u64();
        if r < zone {
            return (r % bound) as usize;
        }
    }
}

/// Pearson correlation of `sample_count` seeded-random pairs of adjacent
/// pixels in `direction`.
pub fn correlation(img: &FrameBuffer, direction: Direction, sample_count: usize, seed: u64) -> Result<f64, MetricsError> {
    if img.width() < 2 || img.height() < 2 {
        return Err(MetricsError::TooSmall);
    }
    if sample_count == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let (dx, dy) = direction.offset();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..sample_count {
        let c = below(&mut rng, img.channels());
        let x = below(&mut rng, img.width() - dx);
        let y = below(&mut rng, img.height() - dy);
        let a = f64::from(img.get(c, x, y));
        let b = f64::from(img.get(c, x + dx, y + dy));
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let n = sample_count as f64;
    let var_a = sxx / n - (sx / n) * (sx / n);
    let var_b = syy / n - (sy / n) * (sy / n);
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let cov = sxy / n - (sx / n) * (sy / n);
    Ok(cov / libm::sqrt(var_a * var_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, v: u8) -> FrameBuffer {
        FrameBuffer::filled(w, h, 1, v).unwrap()
    }

    #[test]
    fn encryption_quality_examples() {
        let a = synth::natural_image(64, 64, 1, 1);
        assert_eq!(encryption_quality(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.set(0, 10, 10, a.get(0, 10, 10) ^ 1);
        assert_eq!(encryption_quality(&a, &b).unwrap(), 1.0 / 4096.0);
        assert_eq!(encryption_quality(&a, &gray(64, 32, 0)), Err(MetricsError::DimensionMismatch));
    }

    #[test]
    fn npcr_uaci_extremes() {
        let z = gray(16, 16, 0);
        let f = gray(16, 16, 255);
        assert_eq!(npcr(&z, &z).unwrap(), 0.0);
        assert_eq!(uaci(&z, &z).unwrap(), 0.0);
        assert_eq!(npcr(&z, &f).unwrap(), 100.0);
        assert_eq!(uaci(&z, &f).unwrap(), 100.0);
    }

    #[test]
    fn psnr_examples() {
        let z = gray(8, 8, 0);
        assert_eq!(psnr(&z, &z).unwrap(), Psnr::Infinite);
        assert_eq!(psnr(&z, &gray(8, 8, 255)).unwrap(), Psnr::Db(0.0));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&gray(8, 8, 42)).unwrap(), 0.0);
        let all = FrameBuffer::new(16, 16, 1, (0..=255).collect()).unwrap();
        assert!((entropy(&all).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let photo = synth::natural_image(256, 256, 1, 8);
        assert!(correlation(&photo, Direction::Horizontal, 4096, 1).unwrap() > 0.8);
        assert_eq!(correlation(&gray(8, 8, 3), Direction::Vertical, 100, 1), Err(MetricsError::ZeroVariance));
        let noise = synth::noise_image(256, 256, 1, 9);
        for d in Direction::ALL {
            assert!(correlation(&noise, d, 4096, 2).unwrap().abs() < 0.05);
        }
        assert_eq!(correlation(&gray(1, 8, 3), Direction::Vertical, 10, 1), Err(MetricsError::TooSmall));
    }

    #[test]
    fn psnr_serializes_infinity_as_text() {
        assert_eq!(serde_json::to_string(&Psnr::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::from_str::<Psnr>("11.5").unwrap(), Psnr::Db(11.5));
    }

    proptest! {
        #[test]
        fn self_comparisons_are_zero(px in proptest::collection::vec(any::<u8>(), 64)) {
            let a = FrameBuffer::new(8, 8, 1, px).unwrap();
            prop_assert_eq!(npcr(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(uaci(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn eq_is_symmetric(a in proptest::collection::vec(any::<u8>(), 64), b in proptest::collection::vec(any::<u8>(), 64)) {
            let a = FrameBuffer::new(8, 8, 1, a).unwrap();
            let b = FrameBuffer::new(8, 8, 1, b).unwrap();
            prop_assert_eq!(encryption_quality(&a, &b).unwrap(), encryption_quality(&b, &a).unwrap());
        }

        #[test]
        fn entropy_bounded_and_permutation_invariant(px in proptest::collection::vec(any::<u8>(), 64), rot in 0usize..64) {
            let a = FrameBuffer::new(8, 8, 1, px.clone()).unwrap();
            let mut shifted = px;
            shifted.rotate_left(rot);
            let b = FrameBuffer::new(8, 8, 1, shifted).unwrap();
            let e = entropy(&a).unwrap();
            prop_assert!((0.0..=8.0).contains(&e));
            prop_assert!((e - entropy(&b).unwrap()).abs() < 1e-12);
        }
    }
}
