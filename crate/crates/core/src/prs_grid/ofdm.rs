use rustfft::FftPlanner;

use super::{IqSignal, Numerology, PrsConfig, ResourceGrid};
use crate::{Error, Result, C64};

/// FFT bin carrying grid subcarrier `k` with the active band centred on DC.
#[inline]
pub fn subcarrier_to_bin(k: usize, n_subcarriers: usize, n_fft: usize) -> usize {
    (k + n_fft - n_subcarriers / 2) % n_fft
}

/// Signed baseband frequency index of grid subcarrier `k`.
#[inline]
pub fn subcarrier_frequency_index(k: usize, n_subcarriers: usize) -> i64 {
    k as i64 - (n_subcarriers / 2) as i64
}

fn check_shape(grid: &ResourceGrid, num: &Numerology) -> Result<()> {
    let expected = num.n_subcarriers() * num.symbols_per_slot;
    if grid.n_subcarriers != num.n_subcarriers() || grid.cells.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: grid.cells.len(),
        });
    }
    Ok(())
}

/// OFDM synthesis of one slot. The DFT is unitary (scaled by 1/sqrt(n_fft)),
/// so the energy of the CP-stripped samples equals the grid energy.
pub fn ofdm_modulate(grid: &ResourceGrid, num: &Numerology) -> Result<IqSignal> {
    check_shape(grid, num)?;
    let n = num.n_fft;
    let n_sc = num.n_subcarriers();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(num.samples_per_slot());
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for l in 0..num.symbols_per_slot {
        buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
        for (k, &v) in grid.symbol(l).iter().enumerate() {
            buf[subcarrier_to_bin(k, n_sc, n)] = v * scale;
        }
        ifft.process(&mut buf);
        let cp = num.cp_lengths[l];
        out.extend_from_slice(&buf[n - cp..]);
        out.extend_from_slice(&buf);
    }
    Ok(IqSignal::new(out, num.sample_rate_hz))
}

/// Inverse of [`ofdm_modulate`] for a slot starting at sample 0.
pub fn ofdm_demodulate(sig: &IqSignal, num: &Numerology) -> Result<ResourceGrid> {
    ofdm_demodulate_at(sig, num, 0)
}

/// Demodulate the slot whose first CP sample sits at `offset`. Each FFT
/// window starts right after the symbol's cyclic prefix.
pub fn ofdm_demodulate_at(sig: &IqSignal, num: &Numerology, offset: usize) -> Result<ResourceGrid> {
    let needed = offset + num.samples_per_slot();
    if sig.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: sig.len(),
        });
    }
    let n = num.n_fft;
    let n_sc = num.n_subcarriers();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut grid = ResourceGrid::zeros(num, 0, 0);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for l in 0..num.symbols_per_slot {
        let start = offset + num.symbol_start(l) + num.cp_lengths[l];
        buf.copy_from_slice(&sig.samples[start..start + n]);
        fft.process(&mut buf);
        for k in 0..n_sc {
            grid.set(k, l, buf[subcarrier_to_bin(k, n_sc, n)] * scale);
        }
    }
    Ok(grid)
}

/// Concatenate the OFDM waveforms of consecutive slot grids, scaled by `gain`.
pub fn modulate_slots(grids: &[ResourceGrid], num: &Numerology, gain: f64) -> Result<IqSignal> {
    let mut samples = Vec::with_capacity(grids.len() * num.samples_per_slot());
    for g in grids {
        samples.extend(ofdm_modulate(g, num)?.samples.into_iter().map(|s| s * gain));
    }
    Ok(IqSignal::new(samples, num.sample_rate_hz))
}

/// Amplitude gain giving a PRS-only slot of `cfg` unit expected mean power
/// (cyclic prefixes included).
pub fn unit_power_gain(cfg: &PrsConfig, num: &Numerology) -> f64 {
    let n_re = cfg.res_per_symbol(num) as f64;
    let energy: f64 = (cfg.start_symbol..cfg.start_symbol + cfg.num_symbols)
        .map(|l| n_re * (1.0 + num.cp_lengths[l] as f64 / num.n_fft as f64))
        .sum();
    (num.samples_per_slot() as f64 / energy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prs_grid::{generate_prs_grid, PrsConfig};
    use std::f64::consts::PI;

    fn prs_grid() -> (Numerology, ResourceGrid) {
        let num = Numerology::test_profile();
        let g = generate_prs_grid(&PrsConfig::new(77, 1), &num, 3, 2).unwrap();
        (num, g)
    }

    #[test]
    fn zero_grid_gives_zero_samples() {
        let num = Numerology::test_profile();
        let sig = ofdm_modulate(&ResourceGrid::zeros(&num, 0, 0), &num).unwrap();
        assert_eq!(sig.len(), 30_720);
        assert!(sig.samples.iter().all(|s| s.norm() == 0.0));
        let g = ofdm_demodulate(&sig, &num).unwrap();
        assert_eq!(g.energy(), 0.0);
    }

    #[test]
    fn round_trip() {
        let (num, g) = prs_grid();
        let back = ofdm_demodulate(&ofdm_modulate(&g, &num).unwrap(), &num).unwrap();
        let err: f64 = g
            .cells
            .iter()
            .zip(&back.cells)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((err / g.energy()).sqrt() < 1e-9);
    }

    #[test]
    fn single_subcarrier_constant_modulus() {
        let num = Numerology::test_profile();
        let mut g = ResourceGrid::zeros(&num, 0, 0);
        g.set(100, 0, C64::new(1.0, 0.0));
        let sig = ofdm_modulate(&g, &num).unwrap();
        let m = 1.0 / (num.n_fft as f64).sqrt();
        for s in &sig.samples[..num.n_fft + num.cp_lengths[0]] {
            assert!((s.norm() - m).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_identity_excluding_cp() {
        let (num, g) = prs_grid();
        let sig = ofdm_modulate(&g, &num).unwrap();
        let body: f64 = (0..num.symbols_per_slot)
            .map(|l| {
                let s = num.symbol_start(l) + num.cp_lengths[l];
                sig.samples[s..s + num.n_fft]
                    .iter()
                    .map(|x| x.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        assert!((body / g.energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn delayed_input_gives_phase_ramp() {
        let (num, g) = prs_grid();
        let sig = ofdm_modulate(&g, &num).unwrap();
        let delta = 37usize;
        let mut delayed = vec![C64::new(0.0, 0.0); delta];
        delayed.extend_from_slice(&sig.samples);
        let delayed = IqSignal::new(delayed, sig.sample_rate_hz);
        let out = ofdm_demodulate(&delayed, &num).unwrap();
        let n_sc = num.n_subcarriers();
        for l in 1..num.symbols_per_slot {
            for k in 0..n_sc {
                let f = subcarrier_frequency_index(k, n_sc) as f64;
                let ramp = C64::from_polar(1.0, -2.0 * PI * f * delta as f64 / num.n_fft as f64);
                assert!((out.get(k, l) - g.get(k, l) * ramp).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unit_power_normalization() {
        let num = Numerology::test_profile();
        let cfg = PrsConfig::new(12, 4);
        let grids: Vec<_> = (0..4)
            .map(|s| generate_prs_grid(&cfg, &num, s, 0).unwrap())
            .collect();
        let sig = modulate_slots(&grids, &num, unit_power_gain(&cfg, &num)).unwrap();
        assert_eq!(sig.len(), 4 * num.samples_per_slot());
        assert!(
            (sig.mean_power() - 1.0).abs() < 0.02,
            "{}",
            sig.mean_power()
        );
    }

    #[test]
    fn short_input_rejected() {
        let num = Numerology::test_profile();
        let sig = IqSignal::zeros(1000, num.sample_rate_hz);
        assert!(matches!(
            ofdm_demodulate(&sig, &num),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
