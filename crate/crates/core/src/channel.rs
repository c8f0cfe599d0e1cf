//! Large-scale link model: close-in LOS path loss, integer-sample delay,
//! Doppler rotation, idealized power control and AWGN superposition.
//! Powers are tracked in dBm with 0 dBm mapped to unit sample power.

use rand::Rng;

use crate::geom::{distance_3d, Point};
use crate::prs_grid::IqSignal;
use crate::rng::{complex_gaussian, rng_from};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
const MIN_DISTANCE_M: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub fc_hz: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub noise_figure_db: f64,
    pub tx_cap_dbm: f64,
    pub attacker_power_dbm: f64,
    /// Recorded for completeness; the LOS formula does not use them.
    pub building_height_m: f64,
    pub street_width_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            fc_hz: 3.5e9,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            noise_figure_db: 7.0,
            tx_cap_dbm: 24.0,
            attacker_power_dbm: 48.0,
            building_height_m: 15.0,
            street_width_m: 5.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fc_hz > 0.0) || !(self.bs_height_m >= 0.0) || !(self.ue_height_m >= 0.0) {
            return Err(Error::Config("carrier and heights must be positive".into()));
        }
        if !self.noise_figure_db.is_finite()
            || !self.tx_cap_dbm.is_finite()
            || !self.attacker_power_dbm.is_finite()
        {
            return Err(Error::Config("channel powers must be finite".into()));
        }
        Ok(())
    }

    /// Receiver noise density including the noise figure, dBm/Hz.
    pub fn noise_psd_dbm_hz(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + self.noise_figure_db
    }
}

/// Close-in LOS urban-macro path loss in dB; distances under 10 m are clamped.
pub fn uma_pathloss_db(d3d_m: f64, fc_ghz: f64) -> f64 {
    let d = if d3d_m < MIN_DISTANCE_M {
        log::debug!("link distance {d3d_m:.2} m below {MIN_DISTANCE_M} m, clamping");
        MIN_DISTANCE_M
    } else {
        d3d_m
    };
    28.0 + 22.0 * d.log10() + 20.0 * fc_ghz.log10()
}

/// Doppler shift for velocity `v` and unit bearing `bearing_rad` toward the
/// transmitter (angle from the x axis).
pub fn doppler_hz(v: &Point, bearing_rad: f64, fc_hz: f64) -> f64 {
    let u = Point::new(bearing_rad.cos(), bearing_rad.sin());
    v.dot(&u) / SPEED_OF_LIGHT * fc_hz
}

/// Doppler seen at `rx` moving with `v_rx` from a transmitter at `tx`
/// moving with `v_tx`.
pub fn relative_doppler_hz(rx: &Point, v_rx: &Point, tx: &Point, v_tx: &Point, fc_hz: f64) -> f64 {
    let d = tx - rx;
    if d.norm() == 0.0 {
        return 0.0;
    }
    doppler_hz(&(v_rx - v_tx), d.y.atan2(d.x), fc_hz)
}

/// Geometry-derived state of one transmitter→receiver link.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LinkState {
    pub distance_3d_m: f64,
    pub pathloss_db: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub tx_power_dbm: f64,
}

/// End-point description used to build a [`LinkState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: Point,
    pub height_m: f64,
    pub velocity: Point,
}

impl Node {
    pub fn fixed(position: Point, height_m: f64) -> Self {
        Self {
            position,
            height_m,
            velocity: Point::zeros(),
        }
    }
}

impl LinkState {
    pub fn between(tx: &Node, rx: &Node, fc_hz: f64, tx_power_dbm: f64) -> Self {
        let d = distance_3d(&tx.position, tx.height_m, &rx.position, rx.height_m);
        Self {
            distance_3d_m: d,
            pathloss_db: uma_pathloss_db(d, fc_hz / 1e9),
            delay_s: d / SPEED_OF_LIGHT,
            doppler_hz: relative_doppler_hz(
                &rx.position,
                &rx.velocity,
                &tx.position,
                &tx.velocity,
                fc_hz,
            ),
            tx_power_dbm,
        }
    }

    pub fn received_power_dbm(&self) -> f64 {
        self.tx_power_dbm - self.pathloss_db
    }

    pub fn delay_samples(&self, fs: f64) -> usize {
        (self.delay_s * fs).round().max(0.0) as usize
    }
}

/// Received-power policy for [`power_control`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerTarget {
    /// Common received power in dBm.
    Fixed(f64),
    /// Highest common received power reachable within the cap.
    MaxFeasible,
}

/// Set transmit powers so every link arrives at the same power, clamping
/// any link that would need more than `cap_dbm`.
pub fn power_control(links: &[LinkState], target: PowerTarget, cap_dbm: f64) -> Vec<LinkState> {
    let rx_target = match target {
        PowerTarget::Fixed(p) => p,
        PowerTarget::MaxFeasible => links
            .iter()
            .map(|l| cap_dbm - l.pathloss_db)
            .fold(f64::INFINITY, f64::min),
    };
    links
        .iter()
        .map(|l| LinkState {
            tx_power_dbm: (rx_target + l.pathloss_db).min(cap_dbm),
            ..*l
        })
        .collect()
}

/// Scale, delay (whole samples) and Doppler-rotate `sig`. The output keeps
/// the input length; samples pushed past the end are dropped.
pub fn apply_link(sig: &IqSignal, link: &LinkState) -> IqSignal {
    let fs = sig.sample_rate_hz;
    let gain = 10f64.powf(link.received_power_dbm() / 20.0);
    let k = link.delay_samples(fs);
    let n = sig.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    let w = 2.0 * std::f64::consts::PI * link.doppler_hz / fs;
    let phase0 = 2.0 * std::f64::consts::PI * link.doppler_hz * sig.t0_s;
    for (i, o) in out.iter_mut().enumerate().skip(k) {
        *o = sig.samples[i - k] * gain * C64::from_polar(1.0, phase0 + w * i as f64);
    }
    IqSignal {
        samples: out,
        sample_rate_hz: fs,
        t0_s: sig.t0_s,
    }
}

/// Noise power in unit-power terms for density `psd_dbm_hz` over `bandwidth_hz`.
pub fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((psd_dbm_hz + 10.0 * bandwidth_hz.log10()) / 10.0)
}

/// Add complex AWGN of variance `var` in place.
pub fn add_noise<R: Rng + ?Sized>(sig: &mut IqSignal, var: f64, rng: &mut R) {
    for s in &mut sig.samples {
        *s += complex_gaussian(rng, var);
    }
}

/// Sum `signals` (padded to `len`) and add AWGN of power N0·B.
pub fn superpose_with_noise(
    signals: &[IqSignal],
    len: usize,
    sample_rate_hz: f64,
    noise_psd_dbm_hz: f64,
    bandwidth_hz: f64,
    seed: u64,
) -> Result<IqSignal> {
    if let Some(s) = signals.iter().find(|s| s.sample_rate_hz != sample_rate_hz) {
        return Err(Error::param(format!(
            "sample rate mismatch: {} vs {}",
            s.sample_rate_hz, sample_rate_hz
        )));
    }
    let len = signals.iter().map(IqSignal::len).fold(len, usize::max);
    let mut out = IqSignal::zeros(len, sample_rate_hz);
    if let Some(first) = signals.first() {
        out.t0_s = first.t0_s;
    }
    for s in signals {
        out.accumulate(s);
    }
    if noise_psd_dbm_hz.is_finite() {
        add_noise(
            &mut out,
            noise_power(noise_psd_dbm_hz, bandwidth_hz),
            &mut rng_from(seed),
        );
    }
    Ok(out)
}
