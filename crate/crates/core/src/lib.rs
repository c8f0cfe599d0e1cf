//! Downlink OTDOA positioning simulator built around the 5G NR positioning
//! reference signal (PRS), with waveform-level attack synthesis and five
//! integrity techniques.
//!
//! The crate is organised along the signal chain:
//!
//! - [`prs_grid`]: Gold sequences, comb mapping and OFDM synthesis.
//! - [`secure_prs`]: AES-CTR encrypted PRS and correlation statistics.
//! - [`auth_embed`]: HMAC / Ed25519 tags, LDPC protection, RE embedding.
//! - [`channel`]: path loss, delay, Doppler, power control, AWGN.
//! - [`adversary`]: false base station spoofing, meaconing, jamming.
//! - [`receiver`]: Doppler scan, ToA correlation, hearability, RSTD.
//! - [`locate`]: range-difference multilateration and outcome classes.
//! - [`detect`]: angle gate (ULA + ESPRIT), DL/UL handshake, gated tracker.
//! - [`scenario`]: hexagonal topology, serving cells and trajectories.
//! - [`harness`]: configuration, per-epoch pipeline, metrics and export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod auth_embed;
pub mod channel;
pub mod detect;
pub mod error;
pub mod geom;
pub mod harness;
pub mod locate;
pub mod prs_grid;
pub mod receiver;
pub mod rng;
pub mod scenario;
pub mod secure_prs;

pub use error::{Error, Result};
pub use geom::Point;

/// Complex baseband sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Outcome of a single integrity check.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionVerdict {
    pub technique: Technique,
    pub valid: bool,
    /// Short machine-readable reason when `valid` is false.
    pub reason: Option<String>,
    /// Scalar diagnostics (angle deviation, position discrepancy, NIS, ...).
    pub diagnostics: std::collections::BTreeMap<String, f64>,
}

impl DetectionVerdict {
    pub fn valid(technique: Technique) -> Self {
        Self {
            technique,
            valid: true,
            reason: None,
            diagnostics: Default::default(),
        }
    }

    pub fn invalid(technique: Technique, reason: impl Into<String>) -> Self {
        Self {
            technique,
            valid: false,
            reason: Some(reason.into()),
            diagnostics: Default::default(),
        }
    }

    pub fn with_diag(mut self, name: &str, value: f64) -> Self {
        self.diagnostics.insert(name.to_string(), value);
        self
    }
}

/// The five integrity techniques evaluated by the harness.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Hmac,
    DigitalSignature,
    Absa,
    Handshake,
    Tracking,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Hmac,
        Technique::DigitalSignature,
        Technique::Absa,
        Technique::Handshake,
        Technique::Tracking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Hmac => "hmac",
            Technique::DigitalSignature => "ds",
            Technique::Absa => "absa",
            Technique::Handshake => "handshake",
            Technique::Tracking => "tracking",
        }
    }
}
