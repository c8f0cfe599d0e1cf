//! Attack waveform synthesis: false-base-station PRS spoofing, meaconing
//! (capture and relay) and band-limited noise jamming.

use rustfft::FftPlanner;

use crate::geom::Point;
use crate::prs_grid::{
    generate_prs_grid, modulate_slots, unit_power_gain, IqSignal, Numerology, PrsConfig,
};
use crate::rng::{complex_gaussian, rng_from};
use crate::scenario::TrajectoryPoint;
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    FbsSpoof,
    Meaconing,
    Jamming,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::FbsSpoof => "fbs_spoof",
            AttackKind::Meaconing => "meaconing",
            AttackKind::Jamming => "jamming",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub power_dbm: f64,
    pub lag_points: usize,
    pub height_m: f64,
    /// Spoofed position relative to the attacker (used when no absolute target is set).
    pub spoof_offset_m: [f64; 2],
    pub spoof_target_position: Option<[f64; 2]>,
    /// Serving-set indices whose PRS is spoofed; `None` spoofs all.
    pub spoofed_subset: Option<Vec<usize>>,
    pub meacon_processing_delay_s: f64,
    pub jam_bandwidth_hz: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            power_dbm: 48.0,
            lag_points: 10,
            height_m: 1.5,
            spoof_offset_m: [200.0, 0.0],
            spoof_target_position: None,
            spoofed_subset: None,
            meacon_processing_delay_s: 1e-6,
            jam_bandwidth_hz: 9.36e6,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.power_dbm.is_finite() || !(self.height_m >= 0.0) {
            return Err(Error::Config(
                "attacker power and height must be finite".into(),
            ));
        }
        if !(self.meacon_processing_delay_s >= 0.0) {
            return Err(Error::Config("meaconing delay must be non-negative".into()));
        }
        if !(self.jam_bandwidth_hz > 0.0) {
            return Err(Error::Config("jamming bandwidth must be positive".into()));
        }
        if let Some(s) = &self.spoofed_subset {
            if s.iter().any(|&i| i > 2) {
                return Err(Error::Config(
                    "spoofed_subset indices must be in 0..3".into(),
                ));
            }
        }
        Ok(())
    }

    /// Fake position for an attacker at `attacker`.
    pub fn fake_position(&self, attacker: &Point) -> Point {
        match self.spoof_target_position {
            Some([x, y]) => Point::new(x, y),
            None => attacker + Point::new(self.spoof_offset_m[0], self.spoof_offset_m[1]),
        }
    }
}

/// Attacker state at `epoch`: the UE's own trajectory point `lag` epochs back.
pub fn attacker_position(
    trajectory: &[TrajectoryPoint],
    epoch: usize,
    lag_points: usize,
) -> TrajectoryPoint {
    let idx = epoch
        .saturating_sub(lag_points)
        .min(trajectory.len().saturating_sub(1));
    trajectory[idx]
}

/// Per-BS transmit delays making replica arrivals look like a UE at `fake`.
/// Delays are relative (the common attacker→UE path adds equally to all)
/// and shifted so the smallest is zero.
pub fn fbs_spoof_delays(fake: &Point, bs_positions: &[Point]) -> Vec<f64> {
    let d: Vec<f64> = bs_positions
        .iter()
        .map(|p| (fake - p).norm() / SPEED_OF_LIGHT)
        .collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    d.iter().map(|x| x - min).collect()
}

/// Absolute slot number and frame of each slot in a measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotId {
    pub slot: u32,
    pub frame: u32,
}

/// Sum of delayed standard-PRS replicas, normalized to unit mean power and
/// zero-padded to `len` samples.
pub fn gen_fbs_waveform(
    targets: &[PrsConfig],
    delays_s: &[f64],
    num: &Numerology,
    slots: &[SlotId],
    len: usize,
) -> Result<IqSignal> {
    if targets.len() != delays_s.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: delays_s.len(),
        });
    }
    let mut out = IqSignal::zeros(len, num.sample_rate_hz);
    if targets.is_empty() {
        return Ok(out);
    }
    let amp = 1.0 / (targets.len() as f64).sqrt();
    for (cfg, &d) in targets.iter().zip(delays_s) {
        let grids = slots
            .iter()
            .map(|s| generate_prs_grid(cfg, num, s.slot, s.frame))
            .collect::<Result<Vec<_>>>()?;
        let w = modulate_slots(&grids, num, amp * unit_power_gain(cfg, num))?;
        let k = (d * num.sample_rate_hz).round().max(0.0) as usize;
        for (i, v) in w.samples.iter().enumerate() {
            if let Some(o) = out.samples.get_mut(i + k) {
                *o += v;
            }
        }
    }
    Ok(out)
}

/// Relay: amplify by `gain_db` and delay by `delay_s` (whole samples),
/// keeping the input length.
pub fn gen_meacon_waveform(composite: &IqSignal, gain_db: f64, delay_s: f64) -> IqSignal {
    let g = 10f64.powf(gain_db / 20.0);
    let k = (delay_s * composite.sample_rate_hz).round().max(0.0) as usize;
    let mut out = IqSignal::zeros(composite.len(), composite.sample_rate_hz);
    out.t0_s = composite.t0_s;
    for i in k..composite.len() {
        out.samples[i] = composite.samples[i - k] * g;
    }
    out
}

/// Complex Gaussian noise of mean power `power_dbm` (0 dBm = unit power)
/// confined to `bandwidth_hz` around DC.
pub fn gen_jam_waveform(
    duration_samples: usize,
    power_dbm: f64,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<IqSignal> {
    if duration_samples == 0 {
        return Err(Error::param("jamming waveform needs at least one sample"));
    }
    let mut rng = rng_from(seed);
    let n = duration_samples.next_power_of_two();
    let half = ((bandwidth_hz / sample_rate_hz).min(1.0) * n as f64 / 2.0).floor() as usize;
    let mut spectrum = vec![C64::new(0.0, 0.0); n];
    let mut used = 0usize;
    for (b, s) in spectrum.iter_mut().enumerate() {
        let f = if b < n / 2 { b } else { n - b };
        if f <= half {
            *s = complex_gaussian(&mut rng, 1.0);
            used += 1;
        }
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(n)
        .process(&mut spectrum);
    // Each output sample has variance used / n after the 1/sqrt(n) scaling.
    let p = 10f64.powf(power_dbm / 10.0);
    let scale = (p / used as f64).sqrt();
    spectrum.truncate(duration_samples);
    Ok(IqSignal::new(
        spectrum.into_iter().map(|s| s * scale).collect(),
        sample_rate_hz,
    ))
}
