//! Security statistics for cipher frames: encryption quality, randomness
//! tests, differential sensitivity (NPCR/UACI), PSNR, entropy and
//! adjacent-pixel correlation, plus the aggregate [`SecurityReport`].

use thiserror::Error;

mod image;
mod randomness;
mod report;
pub mod special;

pub use image::{correlation, encryption_quality, entropy, npcr, psnr, uaci, Direction, Psnr};
pub use randomness::{gap_test, monobit_frequency_test, poker_test, runs_test, BitStream, RunsOutcome};
pub use report::{
    security_report, security_report_with, Check, CipherView, DabView, IdentityView, ReportOptions, SecurityReport,
    Thresholds, SIGNIFICANCE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("DimensionMismatch: images differ in shape")]
    DimensionMismatch,
    #[error("EmptyInput")]
    EmptyInput,
    #[error("ZeroVariance: a sampled series is constant")]
    ZeroVariance,
    #[error("TooFewBits: need {needed}, got {got}")]
    TooFewBits { needed: usize, got: usize },
    #[error("image must be at least 2x2")]
    TooSmall,
    #[error(transparent)]
    Codec(#[from] crate::dab::DabError),
}
