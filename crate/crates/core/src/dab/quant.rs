use super::dct::Block;
use super::frame::BLOCK;
use super::DabError;

/// The IJG luminance table that quality scaling starts from.
pub const BASE_QUANT: [[u16; BLOCK]; BLOCK] = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantMatrix {
    entries: [[u16; BLOCK]; BLOCK],
    quality: u8,
}

impl QuantMatrix {
    pub fn entries(&self) -> &[[u16; BLOCK]; BLOCK] {
        &self.entries
    }

    pub fn quality(&self) -> u8 {
        self.quality
    }
}

/// Scales [`BASE_QUANT`] to quality `q` (1..=100), clamping every entry to at
/// least 1. `5000 / q` is integer division, as in libjpeg.
pub fn quant_matrix(q: u8) -> Result<QuantMatrix, DabError> {
    if !(1..=100).contains(&q) {
        return Err(DabError::InvalidQuality(q));
    }
    let q = u32::from(q);
    let s = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut entries = [[0u16; BLOCK]; BLOCK];
    for (row, base) in entries.iter_mut().zip(BASE_QUANT.iter()) {
        for (e, &b) in row.iter_mut().zip(base.iter()) {
            let raw = (s * u32::from(b) + 50) / 100;
            *e = raw.max(1) as u16;
        }
    }
    Ok(QuantMatrix { entries, quality: q as u8 })
}

/// Divides by the table and rounds to nearest, ties away from zero,
/// saturating at ±32767.
pub fn quantize(coeffs: &Block, qm: &QuantMatrix) -> [[i16; BLOCK]; BLOCK] {
    let mut out = [[0i16; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for j in 0..BLOCK {
            let v = libm::round(coeffs[i][j] / f64::from(qm.entries[i][j]));
            out[i][j] = v.clamp(-32767.0, 32767.0) as i16;
        }
    }
    out
}

pub fn dequantize(q: &[[i16; BLOCK]; BLOCK], qm: &QuantMatrix) -> Block {
    let mut out = [[0.0; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for j in 0..BLOCK {
            out[i][j] = f64::from(q[i][j]) * f64::from(qm.entries[i][j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn q50_is_the_base_table() {
        assert_eq!(quant_matrix(50).unwrap().entries(), &BASE_QUANT);
    }

    #[test]
    fn q1_and_q100_extremes() {
        assert_eq!(quant_matrix(1).unwrap().entries()[0][0], 800);
        assert_eq!(quant_matrix(100).unwrap().entries(), &[[1u16; BLOCK]; BLOCK]);
    }

    #[test]
    fn out_of_range_quality() {
        assert_eq!(quant_matrix(0), Err(DabError::InvalidQuality(0)));
        assert_eq!(quant_matrix(101), Err(DabError::InvalidQuality(101)));
    }

    #[test]
    fn quantize_examples() {
        let qm = quant_matrix(50).unwrap();
        let mut c = [[0.0; BLOCK]; BLOCK];
        assert_eq!(quantize(&c, &qm), [[0; BLOCK]; BLOCK]);
        c[0][0] = 800.0;
        c[0][3] = 7.9;
        let q = quantize(&c, &qm);
        assert_eq!(q[0][0], 50);
        assert_eq!(q[0][3], 0);
        assert_eq!(dequantize(&q, &qm)[0][0], 800.0);
        assert_eq!(dequantize(&[[0; BLOCK]; BLOCK], &qm), [[0.0; BLOCK]; BLOCK]);
    }

    #[test]
    fn ties_round_away_from_zero_and_saturate() {
        let qm = quant_matrix(100).unwrap();
        let mut c = [[0.0; BLOCK]; BLOCK];
        c[0][0] = 2.5;
        c[0][1] = -2.5;
        c[0][2] = 1e9;
        c[0][3] = -1e9;
        let q = quantize(&c, &qm);
        assert_eq!(&q[0][..4], &[3, -3, 32767, -32767]);
    }

    proptest! {
        #[test]
        fn monotone_in_quality(q1 in 1u8..100, step in 1u8..100) {
            let q2 = q1.saturating_add(step).min(100);
            prop_assume!(q1 < q2);
            let a = quant_matrix(q1).unwrap();
            let b = quant_matrix(q2).unwrap();
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    prop_assert!(a.entries()[i][j] >= b.entries()[i][j]);
                }
            }
        }

        #[test]
        fn quantization_error_is_bounded(q in 1u8..=100, vals in proptest::array::uniform8(-2000.0f64..2000.0)) {
            let qm = quant_matrix(q).unwrap();
            let mut c = [[0.0; BLOCK]; BLOCK];
            for (j, v) in vals.iter().enumerate() {
                c[j % BLOCK][(j * 3) % BLOCK] = *v;
            }
            let back = dequantize(&quantize(&c, &qm), &qm);
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    prop_assert!((back[i][j] - c[i][j]).abs() <= f64::from(qm.entries()[i][j]) / 2.0 + 1e-9);
                }
            }
        }
    }
}
