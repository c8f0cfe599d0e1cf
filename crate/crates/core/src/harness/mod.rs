//! Scenario execution: per-epoch waveform pipeline, detection stage,
//! metric aggregation and export.
//!
//! Each epoch is synthesized and measured independently with seeds derived
//! from (master seed, epoch, stream), so that stage runs in parallel. The
//! angle-gate reference and the tracker depend on earlier epochs and run
//! sequentially afterwards.

mod calibrate;
mod config;
mod export;
mod metrics;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{
    attacker_position, fbs_spoof_delays, gen_fbs_waveform, gen_jam_waveform, gen_meacon_waveform,
    AttackKind, SlotId,
};
use crate::auth_embed::{
    build_auth_message, extract_and_verify, sign_and_embed, AuthKind, AuthScheme, LdpcCode,
    TagLayout, DS_TAG_BITS, HMAC_TAG_BITS,
};
use crate::channel::{
    noise_power, power_control, superpose_with_noise, LinkState, Node, PowerTarget,
};
use crate::detect::{
    absa_check, array_angle_deg, esprit_azimuth, handshake_check, kf_predict, kf_update_gated,
    reference_angle, ul_position_model, AngleGate, IncidentSignal, TrackState,
};
use crate::geom::Point;
use crate::locate::{centroid, classify_outcome, multilaterate, OutcomeClass, OutcomeKind};
use crate::prs_grid::{
    modulate_slots, prs_cells, prs_slot_bits, prs_symbols, unit_power_gain, IqSignal, Numerology,
    PrsConfig, ResourceGrid,
};
use crate::receiver::{compute_rstd, equalize_slot, measure_all, BsMeasurement, Replica};
use crate::rng::{derive_seed, rng_from, Stream};
use crate::scenario::{build_topology, load_trajectory, Extent, Topology, TrajectoryPoint};
use crate::secure_prs::{encrypt_prs, KeyMaterial};
use crate::{DetectionVerdict, Error, Result, Technique, C64};

pub use calibrate::{calibrate_kappa, KappaCalibration};
pub use config::{
    KeyConfig, Phase, PhaseWindow, Profile, PrsSettings, ScenarioConfig, SecurityToggles,
    Thresholds, TopologyConfig, TrackerConfig, TrajectorySource, UplinkConfig,
    DEFAULT_MEAS_SIGMA_M,
};
pub use export::{epoch_columns, export, write_epochs_csv, EPOCH_COLUMNS};
pub use metrics::{aggregate, median, MetricsReport, PhaseShares, TechniqueMetrics};

/// Seeds of the fixed LDPC codes shared by base stations and UEs.
const HMAC_CODE_SEED: u64 = 0x4c44_5043_0001;
const DS_CODE_SEED: u64 = 0x4c44_5043_0002;

/// One evaluated trajectory point.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EpochRecord {
    /// 1-based trajectory point.
    pub epoch: usize,
    pub phase: Phase,
    pub attacked: bool,
    pub truth: Point,
    pub estimate: Option<Point>,
    pub outcome: OutcomeClass,
    pub serving: [u32; 3],
    pub detected_bs: usize,
    pub attacker: Option<Point>,
    pub verdicts: BTreeMap<Technique, DetectionVerdict>,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
struct BsTx {
    id: u32,
    position: Point,
    prs: PrsConfig,
    layout: TagLayout,
}

/// Everything fixed for a run: geometry, codes, keys.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub num: Numerology,
    pub trajectory: Vec<TrajectoryPoint>,
    pub topology: Topology,
    pub phases: PhaseWindow,
    hmac: Option<(AuthScheme, LdpcCode)>,
    ds: Option<(Vec<u8>, LdpcCode)>,
    aes_key: Option<[u8; 16]>,
}

/// Stage-one output of an epoch.
struct EpochStage {
    record: EpochRecord,
    /// Measured array angle per serving BS (None when not measurable).
    angles: Vec<Option<f64>>,
}

impl Scenario {
    pub fn prepare(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let num = cfg.numerology();
        let trajectory = match &cfg.trajectory {
            TrajectorySource::File(p) => load_trajectory(p)?,
            TrajectorySource::Synthetic(s) => {
                s.generate(derive_seed(cfg.seed, 0, Stream::Trajectory))?
            }
        };
        if trajectory.is_empty() {
            return Err(Error::Config("trajectory has no points".into()));
        }
        let phases = cfg
            .phases
            .unwrap_or_else(|| PhaseWindow::default_for(trajectory.len()));
        phases.validate(trajectory.len())?;
        let extent =
            Extent::around(trajectory.iter().map(|p| p.xy_m)).expect("non-empty trajectory");
        let topo_seed = cfg
            .topology
            .seed
            .unwrap_or_else(|| derive_seed(cfg.seed, 0, Stream::Topology));
        let topology = build_topology(&extent, cfg.topology.isd_m, topo_seed)?;
        let hmac = if cfg.security.hmac {
            Some((
                AuthScheme::hmac(&cfg.keys.hmac_key()?),
                LdpcCode::new(HMAC_TAG_BITS, HMAC_CODE_SEED)?,
            ))
        } else {
            None
        };
        let ds = if cfg.security.ds {
            Some((
                cfg.keys.ds_seed()?,
                LdpcCode::new(DS_TAG_BITS, DS_CODE_SEED)?,
            ))
        } else {
            None
        };
        let aes_key = if cfg.security.encryption {
            Some(cfg.keys.aes_key()?)
        } else {
            None
        };
        Ok(Self {
            cfg: cfg.clone(),
            num,
            trajectory,
            topology,
            phases,
            hmac,
            ds,
            aes_key,
        })
    }

    /// The configuration with every defaulted value made explicit.
    pub fn resolved_config(&self) -> ScenarioConfig {
        let mut c = self.cfg.clone();
        c.slots_per_epoch = Some(self.cfg.slots());
        c.phases = Some(self.phases);
        c.topology.seed = Some(self.topology.seed);
        c
    }

    fn bs_tx(&self, id: u32) -> Result<BsTx> {
        let st = self
            .topology
            .station(id)
            .ok_or_else(|| Error::param(format!("unknown base station {id}")))?;
        let mut prs = PrsConfig::new(id % 4096, 2 * st.color);
        prs.num_symbols = self.cfg.prs.num_symbols;
        prs.start_symbol = self.cfg.prs.start_symbol;
        let layout = TagLayout::for_color(&self.num, st.color, prs.start_symbol, prs.num_symbols)?;
        Ok(BsTx {
            id,
            position: st.position,
            prs,
            layout,
        })
    }

    fn slot_ids(&self, epoch: usize) -> Vec<SlotId> {
        let s = self.cfg.slots();
        let spf = self.num.slots_per_frame;
        (0..s)
            .map(|k| {
                let abs = epoch * s + k;
                SlotId {
                    slot: (abs % spf) as u32,
                    frame: (abs / spf) as u32,
                }
            })
            .collect()
    }

    /// PRS symbols a UE expects from `bs` in `slot` (encrypted when enabled).
    fn expected_symbols(&self, bs: &BsTx, slot: SlotId) -> Result<Vec<C64>> {
        match self.aes_key {
            None => prs_symbols(&bs.prs, &self.num, slot.slot),
            Some(key) => {
                let bits = prs_slot_bits(&bs.prs, &self.num, slot.slot)?;
                let km = KeyMaterial::for_slot(key, bs.id, slot.frame, slot.slot as u16);
                Ok(encrypt_prs(&bits, &km, bs.id)?.symbols)
            }
        }
    }

    fn prs_grid(&self, bs: &BsTx, slot: SlotId) -> Result<ResourceGrid> {
        let mut g = ResourceGrid::zeros(&self.num, slot.slot, slot.frame);
        g.place(
            &prs_cells(&bs.prs, &self.num),
            &self.expected_symbols(bs, slot)?,
        )?;
        Ok(g)
    }

    fn tx_grid(&self, bs: &BsTx, slot: SlotId) -> Result<ResourceGrid> {
        let mut g = self.prs_grid(bs, slot)?;
        let msg = build_auth_message(bs.id, slot.frame, slot.slot, bs.prs.n_id_seq);
        if let Some((scheme, code)) = &self.hmac {
            g = sign_and_embed(&g, bs.layout.map(AuthKind::Hmac), scheme, code, &msg)?;
        }
        if let Some((seed, code)) = &self.ds {
            let signer = AuthScheme::signer_for_bs(seed, bs.id);
            g = sign_and_embed(
                &g,
                bs.layout.map(AuthKind::DigitalSignature),
                &signer,
                code,
                &msg,
            )?;
        }
        Ok(g)
    }

    fn window_len(&self) -> usize {
        self.cfg.slots() * self.num.samples_per_slot() + self.cfg.receiver.window_for(&self.num) - 1
    }

    fn ue_node(&self, p: &TrajectoryPoint) -> Node {
        Node {
            position: p.xy_m,
            height_m: self.cfg.channel.ue_height_m,
            velocity: p.velocity_mps,
        }
    }

    fn bs_node(&self, bs: &BsTx) -> Node {
        Node::fixed(bs.position, self.cfg.channel.bs_height_m)
    }

    /// Run every epoch and the sequential detection stage.
    pub fn run(&self) -> Result<Vec<EpochRecord>> {
        let stages: Vec<EpochStage> = (0..self.trajectory.len())
            .into_par_iter()
            .map(|e| self.epoch_stage(e))
            .collect::<Result<_>>()?;
        Ok(self.sequential_stage(stages))
    }

    fn epoch_stage(&self, e: usize) -> Result<EpochStage> {
        let point = e + 1;
        let truth = self.trajectory[e];
        let phase = self.phases.phase_of(point);
        let attacked = self.cfg.attack_enabled() && phase == Phase::Attack;
        let serving = self.topology.serving_bs(&truth.xy_m)?;
        let txs = serving
            .iter()
            .map(|&id| self.bs_tx(id))
            .collect::<Result<Vec<_>>>()?;
        let attacker =
            attacked.then(|| attacker_position(&self.trajectory, e, self.cfg.attack.lag_points));
        let mut record = EpochRecord {
            epoch: point,
            phase,
            attacked,
            truth: truth.xy_m,
            estimate: None,
            outcome: OutcomeClass {
                kind: OutcomeKind::DoS,
                error_m: None,
            },
            serving,
            detected_bs: 0,
            attacker: attacker.map(|a| a.xy_m),
            verdicts: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        };
        let mut angles = vec![None; txs.len()];
        match self.measure_epoch(e, &truth, &txs, attacker.as_ref()) {
            Ok(m) => {
                self.fill_from_measurements(&mut record, &mut angles, &txs, &m, e)?;
            }
            Err(err) => {
                log::debug!("epoch {point}: measurement failed: {err}");
                self.fill_failed(&mut record);
            }
        }
        if self.cfg.security.handshake {
            let ul = ul_position_model(
                &truth.xy_m,
                &self.cfg.handshake_gate(),
                derive_seed(self.cfg.seed, e as u64, Stream::Uplink),
            );
            let v = handshake_check(record.estimate.as_ref(), &ul, &self.cfg.handshake_gate());
            record.verdicts.insert(Technique::Handshake, v);
        }
        Ok(EpochStage { record, angles })
    }

    fn fill_failed(&self, record: &mut EpochRecord) {
        for (on, t) in [
            (self.hmac.is_some(), Technique::Hmac),
            (self.ds.is_some(), Technique::DigitalSignature),
        ] {
            if on {
                record
                    .verdicts
                    .insert(t, DetectionVerdict::invalid(t, "measurement_failed"));
            }
        }
    }

    fn fill_from_measurements(
        &self,
        record: &mut EpochRecord,
        angles: &mut [Option<f64>],
        txs: &[BsTx],
        m: &EpochMeasurement,
        e: usize,
    ) -> Result<()> {
        let fs = self.num.sample_rate_hz;
        let detected: Vec<bool> = m.bs.iter().map(|b| b.toa.detected).collect();
        record.detected_bs = detected.iter().filter(|&&d| d).count();
        for (i, b) in m.bs.iter().enumerate() {
            record
                .diagnostics
                .insert(format!("peak_to_floor_db_{i}"), b.toa.peak_to_floor_db);
        }
        let toas: Vec<_> = m.bs.iter().map(|b| b.toa.clone()).collect();
        let estimate = compute_rstd(&toas, txs[0].id, fs).and_then(|rstd| {
            let sites: BTreeMap<u32, Point> = txs
                .iter()
                .filter(|t| rstd.values_s.contains_key(&t.id))
                .map(|t| (t.id, t.position))
                .collect();
            let init = centroid(&txs.iter().map(|t| t.position).collect::<Vec<_>>());
            multilaterate(&rstd, &sites, &init, &self.cfg.solver)
        });
        match &estimate {
            Ok(est) => {
                record.outcome =
                    classify_outcome(Some(est), &record.truth, self.cfg.thresholds.success_m);
                if est.converged {
                    record.estimate = Some(est.xy_m);
                }
                record
                    .diagnostics
                    .insert("residual_norm_m".into(), est.residual_norm);
            }
            Err(err) => log::debug!("epoch {}: no position: {err}", record.epoch),
        }
        if self.hmac.is_some() || self.ds.is_some() {
            self.verify_tags(record, txs, m)?;
        }
        if self.cfg.security.absa {
            let mut rng = rng_from(derive_seed(self.cfg.seed, e as u64, Stream::Array));
            for (i, a) in angles.iter_mut().enumerate() {
                if detected[i] {
                    *a = self.measure_angle(&record.truth, i, txs, &m.powers, &mut rng);
                }
            }
        }
        Ok(())
    }

    fn verify_tags(
        &self,
        record: &mut EpochRecord,
        txs: &[BsTx],
        m: &EpochMeasurement,
    ) -> Result<()> {
        let slots = self.slot_ids(record.epoch - 1);
        let mut kinds = Vec::new();
        if let Some((scheme, code)) = &self.hmac {
            kinds.push((AuthKind::Hmac, None, scheme.verifier(), code));
        }
        if let Some((seed, code)) = &self.ds {
            kinds.push((
                AuthKind::DigitalSignature,
                Some(seed),
                AuthScheme::hmac(b"unused"),
                code,
            ));
        }
        for (kind, ds_seed, hmac_verifier, code) in kinds {
            let technique = kind.technique();
            let mut verdict = DetectionVerdict::valid(technique);
            'bs: for (i, (tx, meas)) in txs.iter().zip(&m.bs).enumerate() {
                if !meas.toa.detected {
                    verdict = DetectionVerdict::invalid(technique, "bs_not_detected")
                        .with_diag("bs_index", i as f64);
                    break;
                }
                let scheme = match ds_seed {
                    Some(seed) => AuthScheme::signer_for_bs(seed, tx.id).verifier(),
                    None => hmac_verifier.clone(),
                };
                let cells = prs_cells(&tx.prs, &self.num);
                for (s, slot) in slots.iter().enumerate() {
                    let symbols = self.expected_symbols(tx, *slot)?;
                    let eq = match equalize_slot(
                        &m.received,
                        &self.num,
                        meas.toa.sample_index,
                        meas.freq_hz,
                        s,
                        &cells,
                        &symbols,
                        &tx.layout.spare,
                    ) {
                        Ok(eq) => eq,
                        Err(_) => {
                            verdict = DetectionVerdict::invalid(technique, "slot_outside_window");
                            break 'bs;
                        }
                    };
                    let msg = build_auth_message(tx.id, slot.frame, slot.slot, tx.prs.n_id_seq);
                    let v = extract_and_verify(
                        &eq.grid,
                        tx.layout.map(kind),
                        &scheme,
                        code,
                        &msg,
                        eq.noise_var,
                    );
                    if !v.valid {
                        verdict = v.with_diag("bs_index", i as f64);
                        break 'bs;
                    }
                }
            }
            record.verdicts.insert(technique, verdict);
        }
        Ok(())
    }

    /// ESPRIT angle toward serving BS `i`. Snapshot powers are
    /// post-correlation: coherent sources carry the correlation gain of the
    /// PRS resource elements in the window, interference that does not
    /// correlate with the replica adds to the noise.
    fn measure_angle<R: Rng>(
        &self,
        ue: &Point,
        i: usize,
        txs: &[BsTx],
        powers: &SourcePowers,
        rng: &mut R,
    ) -> Option<f64> {
        let ula = &self.cfg.ula;
        let gain = (txs[i].prs.res_per_symbol(&self.num)
            * txs[i].prs.num_symbols
            * self.cfg.slots()) as f64;
        let mut sources = Vec::new();
        let theta_bs = array_angle_deg(ue, &txs[i].position).ok()?;
        sources.push(IncidentSignal::random(
            theta_bs,
            powers.legit_mw[i] * gain,
            ula.snapshots,
            rng,
        ));
        if let Some((attacker, coherent)) =
            powers.attacker_coherent_mw.as_ref().map(|(a, c)| (a, c[i]))
        {
            if coherent > 0.0 {
                // A relay on top of the array has no defined bearing; broadside is used.
                let theta = array_angle_deg(ue, attacker).unwrap_or(0.0);
                sources.push(IncidentSignal::random(
                    theta,
                    coherent * gain,
                    ula.snapshots,
                    rng,
                ));
            }
        }
        let noise = powers.noise_mw + powers.noncoherent_mw;
        let x = crate::detect::ula_snapshots(&sources, ula, noise, rng.gen()).ok()?;
        esprit_azimuth(&x, 1, ula.spacing_wavelengths)
            .ok()
            .map(|v| v[0])
    }

    fn sequential_stage(&self, stages: Vec<EpochStage>) -> Vec<EpochRecord> {
        let mut out = Vec::with_capacity(stages.len());
        let mut last_known: Option<Point> = None;
        let mut track: Option<TrackState> = None;
        let mut last_t: Option<f64> = None;
        let sec = self.cfg.security;
        let tk = &self.cfg.tracker;
        for st in stages {
            let mut rec = st.record;
            if sec.absa {
                let sites: Vec<Point> = rec
                    .serving
                    .iter()
                    .map(|&id| self.topology.station(id).expect("serving station").position)
                    .collect();
                let reference = rec
                    .estimate
                    .or(last_known)
                    .unwrap_or_else(|| centroid(&sites));
                let mut verdict = DetectionVerdict::valid(Technique::Absa);
                let mut worst: f64 = 0.0;
                for (i, site) in sites.iter().enumerate() {
                    let v = match reference_angle(&reference, site) {
                        Ok(theta_ref) => absa_check(
                            st.angles[i],
                            &AngleGate {
                                theta_ref_deg: theta_ref,
                                delta_th_deg: self.cfg.thresholds.delta_th_deg,
                            },
                        ),
                        Err(_) => DetectionVerdict::invalid(Technique::Absa, "reference_undefined"),
                    };
                    if let Some(&d) = v.diagnostics.get("deviation_deg") {
                        worst = worst.max(d);
                    }
                    if !v.valid && verdict.valid {
                        verdict = v.with_diag("bs_index", i as f64);
                    }
                }
                verdict
                    .diagnostics
                    .insert("max_deviation_deg".into(), worst);
                verdict.diagnostics.remove("deviation_deg");
                rec.verdicts.insert(Technique::Absa, verdict);
            }
            if sec.tracking {
                let t = self.trajectory[rec.epoch - 1].t_s;
                let v = match track.take() {
                    None => match rec.estimate {
                        Some(p) => {
                            track = Some(TrackState::new(
                                &p,
                                tk.meas_sigma_m,
                                tk.init_vel_sigma_mps,
                                self.cfg.thresholds.gamma,
                                self.cfg.thresholds.mofn_n,
                            ));
                            DetectionVerdict::valid(Technique::Tracking)
                                .with_diag("initialized", 1.0)
                        }
                        None => DetectionVerdict::invalid(Technique::Tracking, "no_measurement"),
                    },
                    Some(ts) => {
                        let dt = last_t
                            .map(|l| t - l)
                            .filter(|d| *d > 0.0)
                            .unwrap_or(tk.dt_s);
                        let pred = kf_predict(&ts, dt, tk.accel_sigma_mps2).expect("positive dt");
                        let (next, v) =
                            kf_update_gated(&pred, rec.estimate.as_ref(), tk.meas_sigma_m);
                        rec.diagnostics.insert("track_x".into(), next.x[0]);
                        rec.diagnostics.insert("track_y".into(), next.x[1]);
                        track = Some(next);
                        v
                    }
                };
                last_t = Some(t);
                rec.verdicts.insert(Technique::Tracking, v);
            }
            if rec.estimate.is_some() {
                last_known = rec.estimate;
            }
            out.push(rec);
        }
        out
    }
}

/// Received powers (mW, in the PRS band) used by the array model.
#[derive(Debug, Clone, Default)]
struct SourcePowers {
    legit_mw: Vec<f64>,
    /// Attacker position and the replica-coherent part of its power per BS.
    attacker_coherent_mw: Option<(Point, Vec<f64>)>,
    noncoherent_mw: f64,
    noise_mw: f64,
}

struct EpochMeasurement {
    received: IqSignal,
    bs: Vec<BsMeasurement>,
    powers: SourcePowers,
}

fn dbm_to_mw(p: f64) -> f64 {
    10f64.powf(p / 10.0)
}

impl Scenario {
    fn measure_epoch(
        &self,
        e: usize,
        truth: &TrajectoryPoint,
        txs: &[BsTx],
        attacker: Option<&TrajectoryPoint>,
    ) -> Result<EpochMeasurement> {
        let num = &self.num;
        let fs = num.sample_rate_hz;
        let ch = &self.cfg.channel;
        let len = self.window_len();
        let slots = self.slot_ids(e);
        let t0 = truth.t_s;
        let ue = self.ue_node(truth);
        let psd = ch.noise_psd_dbm_hz();

        let links: Vec<LinkState> = txs
            .iter()
            .map(|t| LinkState::between(&self.bs_node(t), &ue, ch.fc_hz, 0.0))
            .collect();
        let links = power_control(&links, PowerTarget::MaxFeasible, ch.tx_cap_dbm);
        let mut waves = Vec::with_capacity(txs.len());
        for t in txs {
            let grids = slots
                .iter()
                .map(|s| self.tx_grid(t, *s))
                .collect::<Result<Vec<_>>>()?;
            let mut w = modulate_slots(&grids, num, unit_power_gain(&t.prs, num))?.resized(len);
            w.t0_s = t0;
            waves.push(w);
        }
        let mut rx: Vec<IqSignal> = waves
            .iter()
            .zip(&links)
            .map(|(w, l)| crate::channel::apply_link(w, l))
            .collect();
        let mut powers = SourcePowers {
            legit_mw: links
                .iter()
                .map(|l| dbm_to_mw(l.received_power_dbm()))
                .collect(),
            attacker_coherent_mw: None,
            noncoherent_mw: 0.0,
            noise_mw: noise_power(psd, num.occupied_bandwidth_hz()),
        };

        if let Some(att) = attacker {
            let a = &self.cfg.attack;
            let att_node = Node {
                position: att.xy_m,
                height_m: a.height_m,
                velocity: att.velocity_mps,
            };
            let link = LinkState::between(&att_node, &ue, ch.fc_hz, a.power_dbm);
            let p_att = dbm_to_mw(link.received_power_dbm());
            let mut coherent = vec![0.0; txs.len()];
            let mut wave = match a.kind {
                AttackKind::None => unreachable!("attacker only exists for active attacks"),
                AttackKind::FbsSpoof => {
                    let idx: Vec<usize> = match &a.spoofed_subset {
                        Some(s) => s.clone(),
                        None => (0..txs.len()).collect(),
                    };
                    let targets: Vec<PrsConfig> = idx.iter().map(|&i| txs[i].prs.clone()).collect();
                    let sites: Vec<Point> = idx.iter().map(|&i| txs[i].position).collect();
                    let delays = fbs_spoof_delays(&a.fake_position(&att.xy_m), &sites);
                    for &i in &idx {
                        let share = p_att / idx.len() as f64;
                        if self.aes_key.is_some() {
                            powers.noncoherent_mw += share;
                        } else {
                            coherent[i] = share;
                        }
                    }
                    gen_fbs_waveform(&targets, &delays, num, &slots, len)?
                }
                AttackKind::Meaconing => {
                    let to_att: Vec<IqSignal> = waves
                        .iter()
                        .zip(txs.iter().zip(&links))
                        .map(|(w, (t, l))| {
                            let bl = LinkState::between(
                                &self.bs_node(t),
                                &att_node,
                                ch.fc_hz,
                                l.tx_power_dbm,
                            );
                            crate::channel::apply_link(w, &bl)
                        })
                        .collect();
                    let at_att: Vec<f64> = txs
                        .iter()
                        .zip(&links)
                        .map(|(t, l)| {
                            dbm_to_mw(
                                LinkState::between(
                                    &self.bs_node(t),
                                    &att_node,
                                    ch.fc_hz,
                                    l.tx_power_dbm,
                                )
                                .received_power_dbm(),
                            )
                        })
                        .collect();
                    let seed = derive_seed(self.cfg.seed, e as u64, Stream::AttackerNoise);
                    let mut composite = superpose_with_noise(&to_att, len, fs, psd, fs, seed)?;
                    let p = composite.mean_power();
                    if p > 0.0 {
                        composite.scale(1.0 / p.sqrt());
                    }
                    let total = at_att.iter().sum::<f64>() + noise_power(psd, fs);
                    for (c, pa) in coherent.iter_mut().zip(&at_att) {
                        *c = p_att * pa / total;
                    }
                    powers.noncoherent_mw +=
                        p_att * noise_power(psd, num.occupied_bandwidth_hz()) / total;
                    gen_meacon_waveform(&composite, 0.0, a.meacon_processing_delay_s)
                }
                AttackKind::Jamming => {
                    powers.noncoherent_mw += p_att;
                    gen_jam_waveform(
                        len,
                        0.0,
                        a.jam_bandwidth_hz,
                        fs,
                        derive_seed(self.cfg.seed, e as u64, Stream::Jammer),
                    )?
                }
            };
            wave.t0_s = t0;
            rx.push(crate::channel::apply_link(&wave, &link));
            powers.attacker_coherent_mw = Some((att.xy_m, coherent));
        }

        let seed = derive_seed(self.cfg.seed, e as u64, Stream::UeNoise);
        let received = superpose_with_noise(&rx, len, fs, psd, fs, seed)?;
        let replicas = txs
            .iter()
            .map(|t| {
                let grids = slots
                    .iter()
                    .map(|s| self.prs_grid(t, *s))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Replica {
                    bs_id: t.id,
                    samples: modulate_slots(&grids, num, unit_power_gain(&t.prs, num))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let bs = measure_all(&received, &replicas, num, &self.cfg.receiver)?;
        Ok(EpochMeasurement {
            received,
            bs,
            powers,
        })
    }
}

/// Prepare and run a scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<EpochRecord>> {
    Scenario::prepare(cfg)?.run()
}
