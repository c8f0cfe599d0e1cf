use crate::{Error, Result};

/// NR numerology and sampling parameters for one carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerology {
    pub mu: u32,
    pub scs_hz: f64,
    pub n_fft: usize,
    pub sample_rate_hz: f64,
    pub n_prb: usize,
    /// Cyclic prefix length of each symbol in a slot, samples.
    pub cp_lengths: Vec<usize>,
    pub symbols_per_slot: usize,
    pub slots_per_frame: usize,
}

impl Numerology {
    /// Normal-CP numerology with `n_fft`-point OFDM. Only mu 0 and 1 are
    /// supported since their CP pattern repeats every slot.
    pub fn new(mu: u32, n_prb: usize, n_fft: usize) -> Result<Self> {
        if mu > 1 {
            return Err(Error::param(format!(
                "numerology mu={mu} not supported (0 or 1)"
            )));
        }
        if n_fft < 2048 || !n_fft.is_multiple_of(2048) {
            return Err(Error::param(format!(
                "n_fft={n_fft} must be a multiple of 2048"
            )));
        }
        if 12 * n_prb > n_fft || n_prb == 0 {
            return Err(Error::param(format!(
                "{n_prb} PRBs do not fit a {n_fft}-point FFT"
            )));
        }
        let scs_hz = 15_000.0 * f64::from(1u32 << mu);
        let k = n_fft / 2048;
        let normal = 144 * k;
        let long = normal + 16 * k * (1usize << mu);
        let symbols_per_slot = 14;
        // The long CP opens each half-subframe.
        let half_subframe = 7 * (1usize << mu);
        let cp_lengths = (0..symbols_per_slot)
            .map(|l| if l % half_subframe == 0 { long } else { normal })
            .collect();
        Ok(Self {
            mu,
            scs_hz,
            n_fft,
            sample_rate_hz: n_fft as f64 * scs_hz,
            n_prb,
            cp_lengths,
            symbols_per_slot,
            slots_per_frame: 10 * (1usize << mu),
        })
    }

    /// 15 kHz, 52 PRBs (10 MHz), 8192-point FFT at 122.88 MHz.
    pub fn full_rate() -> Self {
        Self::new(0, 52, 8192).expect("static numerology")
    }

    /// 15 kHz, 52 PRBs, 2048-point FFT at 30.72 MHz.
    pub fn test_profile() -> Self {
        Self::new(0, 52, 2048).expect("static numerology")
    }

    pub fn n_subcarriers(&self) -> usize {
        12 * self.n_prb
    }

    pub fn samples_per_slot(&self) -> usize {
        self.cp_lengths.iter().map(|cp| cp + self.n_fft).sum()
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.samples_per_slot() as f64 / self.sample_rate_hz
    }

    /// Sample offset of the first CP sample of symbol `l` within a slot.
    pub fn symbol_start(&self, l: usize) -> usize {
        self.cp_lengths[..l].iter().map(|cp| cp + self.n_fft).sum()
    }

    /// Occupied bandwidth of the active subcarriers, Hz.
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        self.n_subcarriers() as f64 * self.scs_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_hold_for_profiles() {
        for num in [Numerology::test_profile(), Numerology::full_rate()] {
            assert_eq!(num.sample_rate_hz, num.n_fft as f64 * num.scs_hz);
            assert_eq!(num.symbols_per_slot, 14);
            assert!(num.n_subcarriers() <= num.n_fft);
            // One 15 kHz slot lasts exactly 1 ms.
            assert!((num.slot_duration_s() - 1e-3).abs() < 1e-15);
        }
        assert_eq!(Numerology::full_rate().sample_rate_hz, 122.88e6);
        assert_eq!(Numerology::test_profile().samples_per_slot(), 30_720);
    }

    #[test]
    fn cp_pattern() {
        let num = Numerology::test_profile();
        assert_eq!(num.cp_lengths[0], 160);
        assert_eq!(num.cp_lengths[7], 160);
        assert_eq!(num.cp_lengths[1], 144);
        let full = Numerology::full_rate();
        assert_eq!(full.cp_lengths[0], 640);
        assert_eq!(full.cp_lengths[3], 576);
        let mu1 = Numerology::new(1, 51, 2048).unwrap();
        assert_eq!(mu1.cp_lengths[0], 176);
        assert_eq!(mu1.cp_lengths[7], 144);
        assert!((mu1.slot_duration_s() - 0.5e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Numerology::new(2, 52, 2048).is_err());
        assert!(Numerology::new(0, 200, 2048).is_err());
        assert!(Numerology::new(0, 52, 1000).is_err());
    }
}
