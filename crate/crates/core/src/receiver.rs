//! Positioning receiver: Doppler scan with parabolic refinement, FFT-based
//! ToA correlation, hearability test, RSTD formation, residual CFO
//! estimation and per-RE equalization for tag extraction.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::prs_grid::{ofdm_demodulate_at, IqSignal, Numerology, ResourceGrid};
use crate::{Error, Result, C64};

/// Measurement settings. `kappa_db` is the hearability threshold on the
/// peak-to-floor ratio of correlation power.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    pub doppler_span_hz: f64,
    pub doppler_step_hz: f64,
    /// Lags on each side of the peak excluded from the floor, at 30.72 MHz.
    pub guard_samples: usize,
    pub kappa_db: f64,
    /// Correlation lags searched, at 30.72 MHz (scaled with the sample rate).
    pub search_window: usize,
}

/// Hearability threshold calibrated on pure-noise windows (see
/// `calibrate_kappa`); 3000 noise-only correlations peaked at 12.82 dB
/// (99th percentile 11.39 dB).
pub const DEFAULT_KAPPA_DB: f64 = 12.9;

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            doppler_span_hz: 1000.0,
            doppler_step_hz: 100.0,
            guard_samples: 16,
            kappa_db: DEFAULT_KAPPA_DB,
            search_window: 2048,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_step_hz > 0.0) || !(self.doppler_span_hz >= self.doppler_step_hz) {
            return Err(Error::Config(
                "Doppler grid needs at least three points".into(),
            ));
        }
        if self.search_window <= 2 * self.guard_samples + 1 {
            return Err(Error::Config(
                "search window must exceed the guard window".into(),
            ));
        }
        Ok(())
    }

    pub fn doppler_grid(&self) -> Vec<f64> {
        let n = (self.doppler_span_hz / self.doppler_step_hz).round() as i64;
        (-n..=n).map(|i| i as f64 * self.doppler_step_hz).collect()
    }

    fn rate_scale(&self, num: &Numerology) -> usize {
        (num.n_fft / 2048).max(1)
    }

    pub fn guard_for(&self, num: &Numerology) -> usize {
        self.guard_samples * self.rate_scale(num)
    }

    pub fn window_for(&self, num: &Numerology) -> usize {
        self.search_window * self.rate_scale(num)
    }

    pub fn kappa_linear(&self) -> f64 {
        10f64.powf(self.kappa_db / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ToaMeasurement {
    pub bs_id: u32,
    pub sample_index: usize,
    pub peak_value: C64,
    pub peak_to_floor_db: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RstdSet {
    pub reference_bs: u32,
    pub values_s: BTreeMap<u32, f64>,
}

/// Peak search over a correlation-power profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakStats {
    pub index: usize,
    pub peak_power: f64,
    pub floor_power: f64,
}

impl PeakStats {
    pub fn ratio_db(&self) -> f64 {
        if self.floor_power > 0.0 {
            10.0 * (self.peak_power / self.floor_power).log10()
        } else if self.peak_power > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Argmax and mean off-peak power, excluding `guard` lags around the peak.
pub fn peak_stats(power: &[f64], guard: usize) -> PeakStats {
    let (index, &peak_power) =
        power
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
    let lo = index.saturating_sub(guard);
    let hi = (index + guard + 1).min(power.len());
    let off: f64 = power[..lo].iter().chain(&power[hi..]).sum();
    let count = power.len() - (hi - lo);
    PeakStats {
        index,
        peak_power,
        floor_power: if count > 0 { off / count as f64 } else { 0.0 },
    }
}

/// Direct (time-domain) correlation at a single lag.
pub fn correlate_at(sig: &[C64], replica: &[C64], lag: usize) -> C64 {
    replica
        .iter()
        .zip(&sig[lag.min(sig.len())..])
        .map(|(r, y)| r.conj() * y)
        .sum()
}

/// Cached FFT correlator for a fixed transform size.
pub struct Correlator {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Correlator {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Zero-padded spectrum of `x` rotated by `-freq_hz`.
    pub fn spectrum(&self, x: &[C64], freq_hz: f64, fs: f64) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        let w = -2.0 * std::f64::consts::PI * freq_hz / fs;
        for (i, (b, v)) in buf.iter_mut().zip(x).enumerate() {
            *b = if freq_hz == 0.0 {
                *v
            } else {
                v * C64::from_polar(1.0, w * i as f64)
            };
        }
        self.fft.process(&mut buf);
        buf
    }

    /// Conjugated replica spectrum ready for [`Self::correlate`].
    pub fn replica_spectrum(&self, replica: &[C64]) -> Vec<C64> {
        self.spectrum(replica, 0.0, 1.0)
            .into_iter()
            .map(|c| c.conj())
            .collect()
    }

    /// Correlation values `c[τ] = Σ r*(k) y(τ + k)` for `τ < n_lags`.
    pub fn correlate(
        &self,
        sig_spec: &[C64],
        replica_conj_spec: &[C64],
        n_lags: usize,
    ) -> Vec<C64> {
        let mut buf: Vec<C64> = sig_spec
            .iter()
            .zip(replica_conj_spec)
            .map(|(a, b)| a * b)
            .collect();
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.truncate(n_lags.min(self.n));
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }
}

fn fft_size(len: usize) -> usize {
    len.next_power_of_two()
}

/// Single-hypothesis ToA over all lags the signal admits.
pub fn toa_estimate(
    sig: &IqSignal,
    replica: &IqSignal,
    bs_id: u32,
    guard: usize,
    kappa_db: f64,
) -> Result<ToaMeasurement> {
    if replica.len() > sig.len() || replica.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: replica.len().max(1),
            available: sig.len(),
        });
    }
    let n_lags = sig.len() - replica.len() + 1;
    let corr = Correlator::new(fft_size(sig.len()));
    let c = corr.correlate(
        &corr.spectrum(&sig.samples, 0.0, sig.sample_rate_hz),
        &corr.replica_spectrum(&replica.samples),
        n_lags,
    );
    let power: Vec<f64> = c.iter().map(|v| v.norm_sqr()).collect();
    let st = peak_stats(&power, guard);
    let db = st.ratio_db();
    Ok(ToaMeasurement {
        bs_id,
        sample_index: st.index,
        peak_value: c[st.index],
        peak_to_floor_db: db,
        detected: db >= kappa_db,
    })
}

/// Vertex offset of the parabola through (-1, a), (0, b), (1, c), in steps.
pub fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 || !den.is_finite() {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerEstimate {
    pub freq_hz: f64,
    pub at_edge: bool,
    pub metric: f64,
}

/// Refine the best point of `metrics` (one per grid frequency).
pub fn refine_doppler(grid_hz: &[f64], metrics: &[f64]) -> Result<DopplerEstimate> {
    if grid_hz.len() < 3 || grid_hz.len() != metrics.len() {
        return Err(Error::param(
            "Doppler grid needs at least 3 points with one metric each",
        ));
    }
    let (best, &metric) =
        metrics.iter().enumerate().fold(
            (0, &f64::NEG_INFINITY),
            |b, c| if c.1 > b.1 { c } else { b },
        );
    if best == 0 || best == grid_hz.len() - 1 {
        return Ok(DopplerEstimate {
            freq_hz: grid_hz[best],
            at_edge: true,
            metric,
        });
    }
    let step = grid_hz[best + 1] - grid_hz[best];
    let off = parabolic_offset(metrics[best - 1], metrics[best], metrics[best + 1]);
    Ok(DopplerEstimate {
        freq_hz: grid_hz[best] + off * step,
        at_edge: false,
        metric,
    })
}

/// Doppler scan of one replica: the hypothesis maximizing peak correlation
/// power, parabolically refined.
pub fn coarse_doppler_estimate(
    sig: &IqSignal,
    replica: &IqSignal,
    grid_hz: &[f64],
) -> Result<DopplerEstimate> {
    if replica.len() > sig.len() {
        return Err(Error::InsufficientSamples {
            needed: replica.len(),
            available: sig.len(),
        });
    }
    let n_lags = sig.len() - replica.len() + 1;
    let corr = Correlator::new(fft_size(sig.len()));
    let rs = corr.replica_spectrum(&replica.samples);
    let metrics: Vec<f64> = grid_hz
        .iter()
        .map(|&f| {
            let ys = corr.spectrum(&sig.samples, f, sig.sample_rate_hz);
            corr.correlate(&ys, &rs, n_lags)
                .iter()
                .map(|c| c.norm_sqr())
                .fold(0.0, f64::max)
        })
        .collect();
    refine_doppler(grid_hz, &metrics)
}

/// Residual frequency from the complex correlation peaks of consecutive
/// slots. Returns `(0, false)` with fewer than two slots.
pub fn residual_cfo_correct(peaks: &[C64], slot_duration_s: f64) -> (f64, bool) {
    if peaks.len() < 2 {
        return (0.0, false);
    }
    let mean_dphi = peaks
        .windows(2)
        .map(|w| (w[1] * w[0].conj()).arg())
        .sum::<f64>()
        / (peaks.len() - 1) as f64;
    (
        mean_dphi / (2.0 * std::f64::consts::PI * slot_duration_s),
        true,
    )
}

pub fn compute_rstd(toas: &[ToaMeasurement], reference_bs: u32, fs: f64) -> Result<RstdSet> {
    let detected: Vec<&ToaMeasurement> = toas.iter().filter(|t| t.detected).collect();
    if detected.len() < 2 {
        return Err(Error::MeasurementUnavailable(format!(
            "{} hearable base stations, need at least 2",
            detected.len()
        )));
    }
    let reference = detected
        .iter()
        .find(|t| t.bs_id == reference_bs)
        .copied()
        .unwrap_or_else(|| {
            detected
                .iter()
                .copied()
                .max_by(|a, b| a.peak_to_floor_db.total_cmp(&b.peak_to_floor_db))
                .expect("non-empty")
        });
    let values_s = detected
        .iter()
        .map(|t| {
            (
                t.bs_id,
                (t.sample_index as f64 - reference.sample_index as f64) / fs,
            )
        })
        .collect();
    Ok(RstdSet {
        reference_bs: reference.bs_id,
        values_s,
    })
}

/// Local replica of one base station for the measurement window.
#[derive(Debug, Clone)]
pub struct Replica {
    pub bs_id: u32,
    pub samples: IqSignal,
}

/// Full per-BS measurement from [`measure_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct BsMeasurement {
    pub toa: ToaMeasurement,
    pub doppler_hz: f64,
    pub doppler_at_edge: bool,
    /// Frequency used for derotation: scan estimate plus residual CFO.
    pub freq_hz: f64,
    pub slot_peaks: Vec<C64>,
}

/// Measure every replica against one received window. The Doppler-shifted
/// signal spectra are shared between base stations.
pub fn measure_all(
    sig: &IqSignal,
    replicas: &[Replica],
    num: &Numerology,
    cfg: &ReceiverConfig,
) -> Result<Vec<BsMeasurement>> {
    let Some(rep_len) = replicas.iter().map(|r| r.samples.len()).max() else {
        return Ok(Vec::new());
    };
    let n_lags = cfg.window_for(num);
    if sig.len() < rep_len + n_lags - 1 {
        return Err(Error::InsufficientSamples {
            needed: rep_len + n_lags - 1,
            available: sig.len(),
        });
    }
    let fs = sig.sample_rate_hz;
    let guard = cfg.guard_for(num);
    let corr = Correlator::new(fft_size(rep_len + n_lags - 1));
    let used = &sig.samples[..(rep_len + n_lags - 1)];
    let rspecs: Vec<Vec<C64>> = replicas
        .iter()
        .map(|r| corr.replica_spectrum(&r.samples.samples))
        .collect();
    let grid = cfg.doppler_grid();
    let mut metrics = vec![vec![0.0; grid.len()]; replicas.len()];
    for (h, &f) in grid.iter().enumerate() {
        let ys = corr.spectrum(used, f, fs);
        for (b, rs) in rspecs.iter().enumerate() {
            metrics[b][h] = corr
                .correlate(&ys, rs, n_lags)
                .iter()
                .map(|c| c.norm_sqr())
                .fold(0.0, f64::max);
        }
    }
    let slot_len = num.samples_per_slot();
    let mut out = Vec::with_capacity(replicas.len());
    for (b, rep) in replicas.iter().enumerate() {
        let dop = refine_doppler(&grid, &metrics[b])?;
        let ys = corr.spectrum(used, dop.freq_hz, fs);
        let c = corr.correlate(&ys, &rspecs[b], n_lags);
        let power: Vec<f64> = c.iter().map(|v| v.norm_sqr()).collect();
        let st = peak_stats(&power, guard);
        let db = st.ratio_db();
        // Per-slot peaks at the detected lag, after the scan derotation.
        let w = -2.0 * std::f64::consts::PI * dop.freq_hz / fs;
        let slots = rep.samples.len() / slot_len;
        let slot_peaks: Vec<C64> = (0..slots)
            .map(|s| {
                (s * slot_len..(s + 1) * slot_len)
                    .map(|k| {
                        let n = st.index + k;
                        rep.samples.samples[k].conj() * used[n] * C64::from_polar(1.0, w * n as f64)
                    })
                    .sum()
            })
            .collect();
        let (residual, _) = residual_cfo_correct(&slot_peaks, num.slot_duration_s());
        out.push(BsMeasurement {
            toa: ToaMeasurement {
                bs_id: rep.bs_id,
                sample_index: st.index,
                peak_value: c[st.index],
                peak_to_floor_db: db,
                detected: db >= cfg.kappa_db,
            },
            doppler_hz: dop.freq_hz,
            doppler_at_edge: dop.at_edge,
            freq_hz: dop.freq_hz + residual,
            slot_peaks,
        });
    }
    Ok(out)
}

/// Per-RE equalized grid of slot `slot` (within the window) for one BS.
#[derive(Debug, Clone)]
pub struct EqualizedSlot {
    pub grid: ResourceGrid,
    /// Complex noise variance of equalized symbols.
    pub noise_var: f64,
}

/// Derotate by `freq_hz`, demodulate slot `slot` at ToA `toa`, estimate the
/// channel on the PRS cells (least squares, smoothed over ±2 neighbours)
/// and equalize every cell by linear interpolation across PRS subcarriers.
/// `noise_cells` must be cells known to be empty at the transmitter.
#[allow(clippy::too_many_arguments)]
pub fn equalize_slot(
    sig: &IqSignal,
    num: &Numerology,
    toa: usize,
    freq_hz: f64,
    slot: usize,
    prs_cells: &[(usize, usize)],
    prs_symbols: &[C64],
    noise_cells: &[(usize, usize)],
) -> Result<EqualizedSlot> {
    let start = toa + slot * num.samples_per_slot();
    let fs = sig.sample_rate_hz;
    let w = -2.0 * std::f64::consts::PI * freq_hz / fs;
    let end = start + num.samples_per_slot();
    if sig.len() < end {
        return Err(Error::InsufficientSamples {
            needed: end,
            available: sig.len(),
        });
    }
    let seg: Vec<C64> = (start..end)
        .map(|n| sig.samples[n] * C64::from_polar(1.0, w * n as f64))
        .collect();
    let rx = ofdm_demodulate_at(&IqSignal::new(seg, fs), num, 0)?;
    let n_sc = num.n_subcarriers();
    let mut h_grid = vec![Vec::<(usize, C64)>::new(); num.symbols_per_slot];
    for (&(k, l), &x) in prs_cells.iter().zip(prs_symbols) {
        h_grid[l].push((k, rx.get(k, l) / x));
    }
    let mut eq = ResourceGrid::zeros(num, 0, 0);
    let mut h_energy = 0.0;
    let mut h_count = 0usize;
    for (l, raw) in h_grid.iter().enumerate() {
        if raw.is_empty() {
            continue;
        }
        let smooth: Vec<(usize, C64)> = (0..raw.len())
            .map(|i| {
                let lo = i.saturating_sub(2);
                let hi = (i + 3).min(raw.len());
                let s: C64 = raw[lo..hi].iter().map(|p| p.1).sum();
                (raw[i].0, s / (hi - lo) as f64)
            })
            .collect();
        h_energy += smooth.iter().map(|p| p.1.norm_sqr()).sum::<f64>();
        h_count += smooth.len();
        let mut j = 0;
        for k in 0..n_sc {
            while j + 1 < smooth.len() && smooth[j + 1].0 <= k {
                j += 1;
            }
            let h = if k <= smooth[0].0 {
                smooth[0].1
            } else if j + 1 >= smooth.len() {
                smooth[smooth.len() - 1].1
            } else {
                let (k0, h0) = smooth[j];
                let (k1, h1) = smooth[j + 1];
                let t = (k - k0) as f64 / (k1 - k0) as f64;
                h0 * (1.0 - t) + h1 * t
            };
            let y = rx.get(k, l);
            eq.set(
                k,
                l,
                if h.norm_sqr() > 0.0 {
                    y / h
                } else {
                    C64::new(0.0, 0.0)
                },
            );
        }
    }
    let mean_h = if h_count > 0 {
        h_energy / h_count as f64
    } else {
        0.0
    };
    let noise_rx = if noise_cells.is_empty() {
        0.0
    } else {
        noise_cells
            .iter()
            .map(|&(k, l)| rx.get(k, l).norm_sqr())
            .sum::<f64>()
            / noise_cells.len() as f64
    };
    let noise_var = if mean_h > 0.0 {
        noise_rx / mean_h
    } else {
        f64::INFINITY
    };
    Ok(EqualizedSlot {
        grid: eq,
        noise_var,
    })
}
