//! PRS sequence generation, comb mapping onto a slot resource grid, and
//! OFDM conversion between grids and baseband IQ.
//!
//! Frequency indexing: grid subcarrier 0 is the lowest active subcarrier.
//! The active band is centred in the FFT with no DC puncture, so grid
//! subcarrier `n_sc / 2` lands on FFT bin 0.

mod gold;
mod grid;
mod numerology;
mod ofdm;

pub use gold::{gold_sequence, prs_c_init, qpsk_demap_hard, qpsk_map};
pub use grid::{generate_prs_grid, prs_cells, prs_slot_bits, prs_symbols, PrsConfig, ResourceGrid};
pub use numerology::Numerology;
pub use ofdm::{
    modulate_slots, ofdm_demodulate, ofdm_demodulate_at, ofdm_modulate, subcarrier_frequency_index,
    subcarrier_to_bin, unit_power_gain,
};

use crate::C64;

/// Complex baseband sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSignal {
    pub samples: Vec<C64>,
    pub sample_rate_hz: f64,
    /// Time of the first sample relative to the slot origin, seconds.
    pub t0_s: f64,
}

impl IqSignal {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
            t0_s: 0.0,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }

    /// Zero-pad (or truncate) to `len` samples.
    pub fn resized(mut self, len: usize) -> Self {
        self.samples.resize(len, C64::new(0.0, 0.0));
        self
    }

    pub fn scale(&mut self, gain: f64) {
        for s in &mut self.samples {
            *s *= gain;
        }
    }

    /// Add `other` sample-wise; `other` may be shorter.
    pub fn accumulate(&mut self, other: &IqSignal) {
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += *b;
        }
    }
}
