use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::image::{correlation, encryption_quality, entropy, npcr, psnr, uaci, Direction, Psnr};
use super::randomness::{gap_test, monobit_frequency_test, poker_test, runs_test, BitStream};
use super::MetricsError;
use crate::dab::{cipher_visualization, encipher_frame, DabKeyset, FrameBuffer};

/// Decision rule for every p-value in the report.
pub const SIGNIFICANCE: f64 = 0.05;

/// Produces the 8-bit image the statistics are computed on.
pub trait CipherView {
    fn cipher_view(&self, plain: &FrameBuffer, keys: &DabKeyset, frame_index: u64) -> Result<FrameBuffer, MetricsError>;
}

/// The real pipeline: encipher, render, crop to the plain frame's size.
#[derive(Clone, Copy, Debug, Default)]
pub struct DabView;

impl CipherView for DabView {
    fn cipher_view(&self, plain: &FrameBuffer, keys: &DabKeyset, frame_index: u64) -> Result<FrameBuffer, MetricsError> {
        let cf = encipher_frame(plain, keys, frame_index)?;
        Ok(cipher_visualization(&cf)?.crop(plain.width(), plain.height())?)
    }
}

/// A do-nothing "cipher" used to check that the report notices it.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityView;

impl CipherView for IdentityView {
    fn cipher_view(&self, plain: &FrameBuffer, _: &DabKeyset, _: u64) -> Result<FrameBuffer, MetricsError> {
        Ok(plain.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportOptions {
    pub correlation_samples: usize,
    pub correlation_seed: u64,
    pub frame_index: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { correlation_samples: 1 << 18, correlation_seed: 0x5e9_2150, frame_index: 0 }
    }
}

/// Pass/fail limits for every statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub min_encryption_quality: f64,
    pub min_npcr_pct: f64,
    pub pixel_uaci_pct: (f64, f64),
    pub key_uaci_pct: (f64, f64),
    pub min_entropy_bits: f64,
    pub max_abs_correlation: f64,
    pub max_psnr_db: f64,
    pub min_p_value: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_encryption_quality: 0.999,
            min_npcr_pct: 99.0,
            pixel_uaci_pct: (32.3, 34.3),
            key_uaci_pct: (32.5, 34.5),
            min_entropy_bits: 7.9,
            max_abs_correlation: 0.02,
            max_psnr_db: 20.0,
            min_p_value: SIGNIFICANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub encryption_quality: f64,
    pub frequency_p: f64,
    /// `None` when the runs prerequisite fails.
    pub runs_p: Option<f64>,
    pub gap_p: f64,
    pub gap_pass: bool,
    pub poker_p: f64,
    pub poker_pass: bool,
    /// Plaintext sensitivity: one flipped bit in the centre pixel.
    pub npcr_pct: f64,
    pub uaci_pct: f64,
    /// Key sensitivity: one flipped bit in the AES key.
    pub key_npcr_pct: f64,
    pub key_uaci_pct: f64,
    pub psnr_db: Psnr,
    pub entropy_bits: f64,
    pub corr_h: f64,
    pub corr_v: f64,
    pub corr_d: f64,
}

/// One evaluated threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: &'static str,
    pub value: String,
    pub requirement: String,
    pub passed: bool,
}

impl SecurityReport {
    pub fn checks(&self, t: &Thresholds) -> Vec<Check> {
        let check = |name, value: String, requirement: String, passed| Check { name, value, requirement, passed };
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        let runs = self.runs_p.map_or(String::from("n/a"), |p| format!("{p:.4}"));
        alloc::vec![
            check("encryption_quality", format!("{:.4}%", 100.0 * self.encryption_quality), format!(">= {}%", 100.0 * t.min_encryption_quality), self.encryption_quality >= t.min_encryption_quality),
            check("frequency", format!("{:.4}", self.frequency_p), format!("p > {}", t.min_p_value), self.frequency_p > t.min_p_value),
            check("runs", runs, format!("p > {}", t.min_p_value), self.runs_p.is_some_and(|p| p > t.min_p_value)),
            check("gap", format!("{:.4}", self.gap_p), format!("p > {}", t.min_p_value), self.gap_pass),
            check("poker", format!("{:.4}", self.poker_p), format!("p > {}", t.min_p_value), self.poker_pass),
            check("pixel_npcr", format!("{:.3}%", self.npcr_pct), format!("> {}%", t.min_npcr_pct), self.npcr_pct > t.min_npcr_pct),
            check("pixel_uaci", format!("{:.3}%", self.uaci_pct), format!("in [{}, {}]%", t.pixel_uaci_pct.0, t.pixel_uaci_pct.1), within(self.uaci_pct, t.pixel_uaci_pct)),
            check("key_npcr", format!("{:.3}%", self.key_npcr_pct), format!("> {}%", t.min_npcr_pct), self.key_npcr_pct > t.min_npcr_pct),
            check("key_uaci", format!("{:.3}%", self.key_uaci_pct), format!("in [{}, {}]%", t.key_uaci_pct.0, t.key_uaci_pct.1), within(self.key_uaci_pct, t.key_uaci_pct)),
            check("psnr", format!("{}", self.psnr_db), format!("< {} dB", t.max_psnr_db), self.psnr_db.db() < t.max_psnr_db),
            check("entropy", format!("{:.4}", self.entropy_bits), format!(">= {}", t.min_entropy_bits), self.entropy_bits >= t.min_entropy_bits),
            check("corr_horizontal", format!("{:.5}", self.corr_h), format!("|r| < {}", t.max_abs_correlation), self.corr_h.abs() < t.max_abs_correlation),
            check("corr_vertical", format!("{:.5}", self.corr_v), format!("|r| < {}", t.max_abs_correlation), self.corr_v.abs() < t.max_abs_correlation),
            check("corr_diagonal", format!("{:.5}", self.corr_d), format!("|r| < {}", t.max_abs_correlation), self.corr_d.abs() < t.max_abs_correlation),
        ]
    }

    pub fn passed(&self, t: &Thresholds) -> bool {
        self.checks(t).iter().all(|c| c.passed)
    }

    /// Plain-text table in the Parameter / Result / Remark layout.
    pub fn table(&self, t: &Thresholds) -> String {
        let mut out = format!("{:<20} {:>14}  {:<24} {}\n", "Parameter/Test", "Result", "Remark", "Status");
        out.push_str(&"-".repeat(68));
        out.push('\n');
        for c in self.checks(t) {
            out.push_str(&format!("{:<20} {:>14}  {:<24} {}\n", c.name, c.value, c.requirement, if c.passed { "PASS" } else { "FAIL" }));
        }
        out
    }
}

/// Pixel whose lowest bit is flipped for the plaintext-sensitivity pair.
fn centre_flipped(plain: &FrameBuffer) -> FrameBuffer {
    let mut f = plain.clone();
    let (x, y) = (plain.width() / 2, plain.height() / 2);
    f.set(0, x, y, plain.get(0, x, y) ^ 1);
    f
}

pub fn security_report(plain: &FrameBuffer, keys: &DabKeyset) -> Result<SecurityReport, MetricsError> {
    security_report_with(plain, keys, &DabView, &ReportOptions::default())
}

pub fn security_report_with(
    plain: &FrameBuffer,
    keys: &DabKeyset,
    view: &dyn CipherView,
    opts: &ReportOptions,
) -> Result<SecurityReport, MetricsError> {
    let cipher = view.cipher_view(plain, keys, opts.frame_index)?;
    let bits = BitStream::from_frame(&cipher);

    let pixel_pair = view.cipher_view(&centre_flipped(plain), keys, opts.frame_index)?;
    let mut key2 = keys.clone();
    key2.aes_key[15] ^= 1;
    let key_pair = view.cipher_view(plain, &key2, opts.frame_index)?;

    let gap_p = gap_test(&bits)?;
    let poker_p = poker_test(&bits)?;
    let corr = |d| correlation(&cipher, d, opts.correlation_samples, opts.correlation_seed);
    // A constant cipher image has no defined correlation; report it as maximal.
    let corr_or_one = |d| match corr(d) {
        Err(MetricsError::ZeroVariance) => Ok(1.0),
        other => other,
    };

    Ok(SecurityReport {
        encryption_quality: encryption_quality(plain, &cipher)?,
        frequency_p: monobit_frequency_test(&bits)?,
        runs_p: runs_test(&bits)?.p_value(),
        gap_p,
        gap_pass: gap_p > SIGNIFICANCE,
        poker_p,
        poker_pass: poker_p > SIGNIFICANCE,
        npcr_pct: npcr(&cipher, &pixel_pair)?,
        uaci_pct: uaci(&cipher, &pixel_pair)?,
        key_npcr_pct: npcr(&cipher, &key_pair)?,
        key_uaci_pct: uaci(&cipher, &key_pair)?,
        psnr_db: psnr(plain, &cipher)?,
        entropy_bits: entropy(&cipher)?,
        corr_h: corr_or_one(Direction::Horizontal)?,
        corr_v: corr_or_one(Direction::Vertical)?,
        corr_d: corr_or_one(Direction::Diagonal)?,
    })
}
