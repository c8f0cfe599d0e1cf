//! Scenario configuration (JSON, unknown keys rejected).

use std::path::{Path, PathBuf};

use crate::adversary::{AttackConfig, AttackKind};
use crate::channel::ChannelConfig;
use crate::detect::{HandshakeGate, UlaConfig, DEFAULT_GATE_GAMMA};
use crate::locate::SolverConfig;
use crate::prs_grid::Numerology;
use crate::receiver::ReceiverConfig;
use crate::scenario::SyntheticTrajectory;
use crate::secure_prs::parse_key_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 30.72 MHz sampling, one slot per epoch.
    Test,
    /// 122.88 MHz sampling, ten slots per epoch.
    Full,
}

impl Profile {
    pub fn numerology(self) -> Numerology {
        match self {
            Profile::Test => Numerology::test_profile(),
            Profile::Full => Numerology::full_rate(),
        }
    }

    pub fn default_slots_per_epoch(self) -> usize {
        match self {
            Profile::Test => 1,
            Profile::Full => 10,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(Profile::Test),
            "full" => Ok(Profile::Full),
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected test or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecurityToggles {
    pub encryption: bool,
    pub hmac: bool,
    pub ds: bool,
    pub absa: bool,
    pub handshake: bool,
    pub tracking: bool,
}

impl SecurityToggles {
    pub fn all_detections() -> Self {
        Self {
            encryption: false,
            hmac: true,
            ds: true,
            absa: true,
            handshake: true,
            tracking: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyConfig {
    /// 128-bit AES key for PRS encryption.
    pub aes_key_hex: String,
    pub hmac_key_hex: String,
    /// Seed from which per-BS Ed25519 keys are derived.
    pub ds_seed_hex: String,
}

impl Default for KeyConfig {
    fn default() -> Self {
        Self {
            aes_key_hex: "2b7e151628aed2a6abf7158809cf4f3c".into(),
            hmac_key_hex: "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f".into(),
            ds_seed_hex: "5eed5eed5eed5eed5eed5eed5eed5eed".into(),
        }
    }
}

impl KeyConfig {
    pub fn aes_key(&self) -> Result<[u8; 16]> {
        parse_key_hex(&self.aes_key_hex)
    }

    pub fn hmac_key(&self) -> Result<Vec<u8>> {
        decode_hex("hmac_key_hex", &self.hmac_key_hex)
    }

    pub fn ds_seed(&self) -> Result<Vec<u8>> {
        decode_hex("ds_seed_hex", &self.ds_seed_hex)
    }
}

fn decode_hex(name: &str, s: &str) -> Result<Vec<u8>> {
    let v = hex::decode(s).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if v.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    Ok(v)
}

/// Attack window in 1-based trajectory points, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseWindow {
    pub attack_start: usize,
    pub attack_end: usize,
}

impl PhaseWindow {
    /// Quarter / half / quarter split of `n` points.
    pub fn default_for(n: usize) -> Self {
        Self {
            attack_start: n / 4 + 1,
            attack_end: 3 * n / 4,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.attack_start < 1 || self.attack_start > self.attack_end + 1 || self.attack_end > n {
            return Err(Error::Config(format!(
                "phase window {}..={} does not fit 1..={n}",
                self.attack_start, self.attack_end
            )));
        }
        Ok(())
    }

    pub fn phase_of(&self, point: usize) -> Phase {
        if point < self.attack_start {
            Phase::Benign
        } else if point <= self.attack_end {
            Phase::Attack
        } else {
            Phase::Recovery
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Benign,
    Attack,
    Recovery,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Benign, Phase::Attack, Phase::Recovery];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Benign => "benign",
            Phase::Attack => "attack",
            Phase::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    File(PathBuf),
    Synthetic(SyntheticTrajectory),
}

impl Default for TrajectorySource {
    fn default() -> Self {
        TrajectorySource::Synthetic(SyntheticTrajectory::default())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub isd_m: f64,
    /// Defaults to a stream of the master seed.
    pub seed: Option<u64>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            isd_m: 500.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub success_m: f64,
    pub delta_th_deg: f64,
    pub epsilon_m: f64,
    pub gamma: f64,
    pub mofn_n: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            success_m: 15.0,
            delta_th_deg: 20.0,
            epsilon_m: 20.0,
            gamma: DEFAULT_GATE_GAMMA,
            mofn_n: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub dt_s: f64,
    pub accel_sigma_mps2: f64,
    /// Measurement noise of the DL position fixes fed to the tracker.
    pub meas_sigma_m: f64,
    pub init_vel_sigma_mps: f64,
}

/// Tracker measurement sigma chosen from benign runs (see README).
pub const DEFAULT_MEAS_SIGMA_M: f64 = 20.0;

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            dt_s: 1.0,
            accel_sigma_mps2: 1.0,
            meas_sigma_m: DEFAULT_MEAS_SIGMA_M,
            init_vel_sigma_mps: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrsSettings {
    pub num_symbols: usize,
    pub start_symbol: usize,
}

impl Default for PrsSettings {
    fn default() -> Self {
        Self {
            num_symbols: 12,
            start_symbol: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UplinkConfig {
    pub ul_sigma_m: f64,
}

impl Default for UplinkConfig {
    fn default() -> Self {
        Self { ul_sigma_m: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Defaults to the profile's value.
    pub slots_per_epoch: Option<usize>,
    pub security: SecurityToggles,
    pub keys: KeyConfig,
    pub attack: AttackConfig,
    /// Defaults to a quarter / half / quarter split of the trajectory.
    pub phases: Option<PhaseWindow>,
    pub topology: TopologyConfig,
    pub trajectory: TrajectorySource,
    pub thresholds: Thresholds,
    pub prs: PrsSettings,
    pub channel: ChannelConfig,
    pub receiver: ReceiverConfig,
    pub solver: SolverConfig,
    pub ula: UlaConfig,
    pub uplink: UplinkConfig,
    pub tracker: TrackerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Test,
            seed: 1,
            slots_per_epoch: None,
            security: SecurityToggles::default(),
            keys: KeyConfig::default(),
            attack: AttackConfig::default(),
            phases: None,
            topology: TopologyConfig::default(),
            trajectory: TrajectorySource::default(),
            thresholds: Thresholds::default(),
            prs: PrsSettings::default(),
            channel: ChannelConfig::default(),
            receiver: ReceiverConfig::default(),
            solver: SolverConfig::default(),
            ula: UlaConfig::default(),
            uplink: UplinkConfig::default(),
            tracker: TrackerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        // Relative trajectory paths are resolved against the config file.
        if let TrajectorySource::File(p) = &cfg.trajectory {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.trajectory = TrajectorySource::File(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn numerology(&self) -> Numerology {
        self.profile.numerology()
    }

    pub fn slots(&self) -> usize {
        self.slots_per_epoch
            .unwrap_or(self.profile.default_slots_per_epoch())
    }

    pub fn handshake_gate(&self) -> HandshakeGate {
        HandshakeGate {
            epsilon_m: self.thresholds.epsilon_m,
            ul_sigma_m: self.uplink.ul_sigma_m,
        }
    }

    pub fn attack_enabled(&self) -> bool {
        self.attack.kind != AttackKind::None
    }

    /// Checks that do not need the trajectory.
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.receiver.validate()?;
        self.ula.validate()?;
        self.attack.validate()?;
        let num = self.numerology();
        if self.slots() == 0 || self.slots() > num.slots_per_frame {
            return Err(Error::Config(format!(
                "slots_per_epoch must be in 1..={}",
                num.slots_per_frame
            )));
        }
        if self.prs.num_symbols == 0
            || self.prs.start_symbol + self.prs.num_symbols > num.symbols_per_slot
        {
            return Err(Error::Config("PRS symbols exceed the slot".into()));
        }
        let t = &self.thresholds;
        if !(t.success_m > 0.0 && t.delta_th_deg > 0.0 && t.epsilon_m > 0.0 && t.gamma > 0.0)
            || t.mofn_n == 0
        {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if !(self.uplink.ul_sigma_m >= 0.0) {
            return Err(Error::Config("ul_sigma_m must be non-negative".into()));
        }
        let k = &self.tracker;
        if !(k.dt_s > 0.0
            && k.accel_sigma_mps2 >= 0.0
            && k.meas_sigma_m > 0.0
            && k.init_vel_sigma_mps > 0.0)
        {
            return Err(Error::Config("tracker parameters must be positive".into()));
        }
        if !(self.topology.isd_m > 0.0) {
            return Err(Error::Config("isd_m must be positive".into()));
        }
        if self.security.encryption {
            self.keys.aes_key()?;
        }
        if self.security.hmac {
            self.keys.hmac_key()?;
        }
        if self.security.ds {
            self.keys.ds_seed()?;
        }
        if let TrajectorySource::Synthetic(s) = &self.trajectory {
            s.validate()?;
        }
        Ok(())
    }

    /// Replace the value at a dotted `path` (e.g. `attack.power_dbm`) with a
    /// JSON literal, re-validating the schema.
    pub fn with_override(&self, path: &str, value: &str) -> Result<Self> {
        let mut tree = serde_json::to_value(self).expect("config serializes");
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let mut node = &mut tree;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::Config(format!("'{path}': '{part}' is not inside an object"))
            })?;
            if i + 1 == parts.len() {
                if !obj.contains_key(*part) {
                    return Err(Error::Config(format!("'{path}': unknown key '{part}'")));
                }
                obj.insert(part.to_string(), parsed.clone());
                break;
            }
            node = obj
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("'{path}': unknown key '{part}'")))?;
        }
        serde_json::from_value(tree).map_err(|source| Error::Json {
            context: format!("override {path}={value}"),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_json(&c.to_json(), "t").unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"seed": 3, "bogus": 1}"#, "t").is_err());
        assert!(
            ScenarioConfig::from_json(r#"{"attack": {"kind": "jamming", "powr": 3}}"#, "t")
                .is_err()
        );
        let c = ScenarioConfig::from_json(r#"{"seed": 3, "attack": {"kind": "meaconing"}}"#, "t")
            .unwrap();
        assert_eq!(c.attack.kind, AttackKind::Meaconing);
        assert_eq!(c.attack.power_dbm, 48.0);
    }

    #[test]
    fn phase_windows() {
        let w = PhaseWindow::default_for(1200);
        assert_eq!((w.attack_start, w.attack_end), (301, 900));
        assert_eq!(w.phase_of(300), Phase::Benign);
        assert_eq!(w.phase_of(301), Phase::Attack);
        assert_eq!(w.phase_of(901), Phase::Recovery);
        let d = PhaseWindow::default_for(120);
        assert_eq!((d.attack_start, d.attack_end), (31, 90));
        assert!(PhaseWindow {
            attack_start: 5,
            attack_end: 200
        }
        .validate(100)
        .is_err());
    }

    #[test]
    fn overrides() {
        let c = ScenarioConfig::default();
        let o = c.with_override("attack.power_dbm", "30").unwrap();
        assert_eq!(o.attack.power_dbm, 30.0);
        let o = c.with_override("attack.kind", "jamming").unwrap();
        assert_eq!(o.attack.kind, AttackKind::Jamming);
        assert!(c.with_override("attack.nope", "1").is_err());
        assert!(c.with_override("seed", "\"x\"").is_err());
    }
}
