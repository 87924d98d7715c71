//! Seeded synthetic frames standing in for camera footage.
//!
//! The images are smooth gradients and soft-edged shapes with a little sensor
//! noise, so neighbouring pixels are strongly correlated the way a photograph's
//! are.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dab::FrameBuffer;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u32() >> 8) as f64 / (1u32 << 24) as f64
}

struct Disk {
    cx: f64,
    cy: f64,
    r: f64,
    level: f64,
}

/// A `width` × `height` frame with `channels` planes, fully determined by `seed`.
pub fn natural_image(width: usize, height: usize, channels: usize, seed: u64) -> FrameBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let mut pixels = Vec::with_capacity(width * height * channels);
    for _ in 0..channels {
        let gx = 60.0 * (unit(&mut rng) - 0.5);
        let gy = 60.0 * (unit(&mut rng) - 0.5);
        let waves: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| (1.0 + 5.0 * unit(&mut rng), 1.0 + 5.0 * unit(&mut rng), core::f64::consts::TAU * unit(&mut rng), 10.0 + 25.0 * unit(&mut rng)))
            .collect();
        let disks: Vec<Disk> = (0..6)
            .map(|_| Disk { cx: unit(&mut rng) * w, cy: unit(&mut rng) * h, r: (0.05 + 0.2 * unit(&mut rng)) * w.min(h), level: 70.0 * (unit(&mut rng) - 0.5) })
            .collect();
        for y in 0..height {
            for x in 0..width {
                let (fx, fy) = (x as f64 / w, y as f64 / h);
                let mut v = 120.0 + gx * fx + gy * fy;
                for (kx, ky, phase, amp) in &waves {
                    v += amp * libm::sin(core::f64::consts::TAU * (kx * fx + ky * fy) + phase);
                }
                for d in &disks {
                    let dist = libm::hypot(x as f64 - d.cx, y as f64 - d.cy);
                    let edge = ((d.r - dist) / 3.0).clamp(0.0, 1.0);
                    v += d.level * edge;
                }
                v += 6.0 * (unit(&mut rng) - 0.5);
                pixels.push(libm::round(v).clamp(0.0, 255.0) as u8);
            }
        }
    }
    FrameBuffer::new(width, height, channels, pixels).expect("dimensions are consistent")
}

/// Uniformly random pixels.
pub fn noise_image(width: usize, height: usize, channels: usize, seed: u64) -> FrameBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = alloc::vec![0u8; width * height * channels];
    rng.fill_bytes(&mut pixels);
    FrameBuffer::new(width, height, channels, pixels).expect("dimensions are consistent")
}
