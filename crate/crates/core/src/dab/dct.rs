//! Orthonormal 8×8 DCT-II in matrix form: `D = T·M·Tᵀ`, `M = Tᵀ·D·T`.

use super::frame::BLOCK;

pub type Block = [[f64; BLOCK]; BLOCK];

/// The 8×8 transform matrix. Row 0 is `1/√8` so that `T` is orthonormal and
/// the inverse transform is simply the transpose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DctMatrix {
    entries: Block,
}

impl DctMatrix {
    pub fn entries(&self) -> &Block {
        &self.entries
    }

    pub fn n(&self) -> usize {
        BLOCK
    }

    pub fn transpose(&self) -> Block {
        transpose(&self.entries)
    }
}

pub fn dct_matrix() -> DctMatrix {
    let n = BLOCK as f64;
    let mut entries = [[0.0; BLOCK]; BLOCK];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = if i == 0 {
                1.0 / libm::sqrt(n)
            } else {
                libm::sqrt(2.0 / n) * libm::cos(((2 * j + 1) * i) as f64 * core::f64::consts::PI / (2.0 * n))
            };
        }
    }
    DctMatrix { entries }
}

fn transpose(a: &Block) -> Block {
    let mut t = [[0.0; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for j in 0..BLOCK {
            t[j][i] = a[i][j];
        }
    }
    t
}

fn matmul(a: &Block, b: &Block) -> Block {
    let mut out = [[0.0; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for k in 0..BLOCK {
            let aik = a[i][k];
            for j in 0..BLOCK {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Precomputed transform and its transpose, so the per-block path avoids
/// re-evaluating cosines.
#[derive(Clone, Copy, Debug)]
pub struct Dct {
    t: Block,
    tt: Block,
}

impl Default for Dct {
    fn default() -> Self {
        let m = dct_matrix();
        Dct { t: m.entries, tt: m.transpose() }
    }
}

impl Dct {
    pub fn forward(&self, block: &Block) -> Block {
        matmul(&matmul(&self.t, block), &self.tt)
    }

    pub fn inverse(&self, coeffs: &Block) -> Block {
        matmul(&matmul(&self.tt, coeffs), &self.t)
    }
}

pub fn forward_dct(block: &Block) -> Block {
    Dct::default().forward(block)
}

pub fn inverse_dct(coeffs: &Block) -> Block {
    Dct::default().inverse(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng) -> Block {
        let mut b = [[0.0; BLOCK]; BLOCK];
        for row in b.iter_mut() {
            for e in row.iter_mut() {
                *e = (rng.next_u32() % 256) as f64;
            }
        }
        b
    }

    #[test]
    fn row_zero_is_flat() {
        let t = dct_matrix();
        for &e in &t.entries()[0] {
            assert!((e - 0.353_553_390_593_273_8).abs() < 1e-12);
        }
        let expected = libm::sqrt(2.0 / 8.0) * libm::cos(core::f64::consts::PI / 16.0);
        assert!((t.entries()[1][0] - expected).abs() < 1e-15);
        assert!((t.entries()[1][0] - 0.49039).abs() < 1e-5);
    }

    #[test]
    fn matrix_is_orthonormal() {
        let t = dct_matrix();
        let p = matmul(t.entries(), &t.transpose());
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-9, "({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let d = forward_dct(&[[100.0; BLOCK]; BLOCK]);
        assert!((d[0][0] - 800.0).abs() < 1e-9);
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i + j > 0 {
                    assert!(v.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inverse_of_dc_only_is_flat() {
        let mut d = [[0.0; BLOCK]; BLOCK];
        assert_eq!(inverse_dct(&d), [[0.0; BLOCK]; BLOCK]);
        d[0][0] = 800.0;
        for row in inverse_dct(&d) {
            for v in row {
                assert!((v - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn round_trip_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dct = Dct::default();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let m = random_block(&mut rng);
            let d = dct.forward(&m);
            let back = dct.inverse(&d);
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    worst = worst.max((back[i][j] - m[i][j]).abs());
                }
            }
            let e_pix: f64 = m.iter().flatten().map(|v| v * v).sum();
            let e_coef: f64 = d.iter().flatten().map(|v| v * v).sum();
            if e_pix > 0.0 {
                assert!(((e_coef - e_pix) / e_pix).abs() < 1e-6);
            }
        }
        assert!(worst < 1e-8, "max round-trip error {worst}");
    }
}
