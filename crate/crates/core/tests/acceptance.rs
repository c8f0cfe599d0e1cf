//! Acceptance suite at desk scale: test profile, 120-epoch trajectories
//! (30 benign / 60 attack / 30 recovery), three seeds. Prints one PASS/FAIL
//! line per criterion with the measured quantities.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Matrix4, Vector4};
use prsloc::adversary::AttackKind;
use prsloc::auth_embed::LdpcCode;
use prsloc::detect::{kf_predict, kf_update_gated, TrackState, DEFAULT_GATE_GAMMA};
use prsloc::harness::{
    aggregate, run_scenario, write_epochs_csv, EpochRecord, MetricsReport, Profile, Scenario,
    ScenarioConfig, SecurityToggles, TrajectorySource,
};
use prsloc::locate::{
    centroid, classify_outcome, multilaterate, synthesize_rstds, OutcomeKind, SolverConfig,
};
use prsloc::prs_grid::qpsk_map;
use prsloc::rng::{complex_gaussian, rng_from};
use prsloc::scenario::SyntheticTrajectory;
use prsloc::secure_prs::{correlate, crosscorr_variance_estimate};
use prsloc::{Point, Technique};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: [u64; 3] = [1, 2, 3];
const EPOCHS: usize = 120;

#[derive(Debug, Clone, Copy)]
struct Setup {
    attack: AttackKind,
    encryption: bool,
    detections: bool,
}

impl Setup {
    const fn new(attack: AttackKind, encryption: bool, detections: bool) -> Self {
        Self {
            attack,
            encryption,
            detections,
        }
    }
}

struct Run {
    records: Vec<EpochRecord>,
    report: MetricsReport,
    csv: Vec<u8>,
}

fn config(setup: Setup, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        profile: Profile::Test,
        seed,
        trajectory: TrajectorySource::Synthetic(SyntheticTrajectory {
            n_points: EPOCHS,
            ..Default::default()
        }),
        ..Default::default()
    };
    cfg.security = if setup.detections {
        SecurityToggles::all_detections()
    } else {
        SecurityToggles::default()
    };
    cfg.security.encryption = setup.encryption;
    cfg.attack.kind = setup.attack;
    cfg
}

fn execute(cfg: &ScenarioConfig) -> Run {
    let records = run_scenario(cfg).expect("scenario run");
    let report = aggregate(&records, cfg).expect("aggregate");
    let mut csv = Vec::new();
    write_epochs_csv(&records, &mut csv).expect("csv");
    Run {
        records,
        report,
        csv,
    }
}

type Cache = Mutex<HashMap<String, Arc<OnceLock<Vec<Run>>>>>;

/// Runs a setup for all seeds once per test binary.
fn runs(setup: Setup) -> Arc<OnceLock<Vec<Run>>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cell = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(format!("{setup:?}"))
        .or_default()
        .clone();
    cell.get_or_init(|| SEEDS.iter().map(|&s| execute(&config(setup, s))).collect());
    cell
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id:02} {} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn share(
    records: &[EpochRecord],
    pred: impl Fn(&EpochRecord) -> bool,
    kind: OutcomeKind,
) -> (usize, usize) {
    let sel: Vec<_> = records.iter().filter(|r| pred(r)).collect();
    (
        sel.iter().filter(|r| r.outcome.kind == kind).count(),
        sel.len(),
    )
}

fn technique(rep: &MetricsReport, t: Technique) -> &prsloc::harness::TechniqueMetrics {
    &rep.techniques[t.name()]
}

const BENIGN_STD: Setup = Setup::new(AttackKind::None, false, true);
const BENIGN_ENC: Setup = Setup::new(AttackKind::None, true, true);

fn c01_benign_accuracy() -> bool {
    let runs = runs(BENIGN_STD);
    let runs = runs.get().unwrap();
    let (mut ok, mut n) = (0, 0);
    let mut per_seed = Vec::new();
    for run in runs {
        let (a, b) = share(&run.records, |r| !r.attacked, OutcomeKind::Success);
        per_seed.push(format!("{:.2}%", 100.0 * a as f64 / b as f64));
        ok += a;
        n += b;
    }
    let rate = ok as f64 / n as f64;
    let pass = rate >= 0.95;
    report(
        1,
        "benign success",
        pass,
        format!(
            "{:.2}% over {n} epochs (per seed {per_seed:?}), need >= 95%",
            100.0 * rate
        ),
    );
    pass
}

fn c02_encryption_equivalence() -> bool {
    let (std_runs, enc_runs) = (runs(BENIGN_STD), runs(BENIGN_ENC));
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (s, e) in std_runs.get().unwrap().iter().zip(enc_runs.get().unwrap()) {
        let (a, n) = share(&s.records, |_| true, OutcomeKind::Success);
        let (b, m) = share(&e.records, |_| true, OutcomeKind::Success);
        let (rs, re) = (a as f64 / n as f64, b as f64 / m as f64);
        worst = worst.max((rs - re).abs());
        detail.push(format!("std {:.2}% enc {:.2}%", 100.0 * rs, 100.0 * re));
    }
    let pass = worst <= 0.03;
    report(
        2,
        "encryption equivalence",
        pass,
        format!("{detail:?}, max gap {:.2} pp, need <= 3", 100.0 * worst),
    );
    pass
}

fn c03_encryption_vs_fbs() -> bool {
    let enc = runs(Setup::new(AttackKind::FbsSpoof, true, false));
    let std = runs(Setup::new(AttackKind::FbsSpoof, false, false));
    let mut large = 0;
    let mut attacked = 0;
    for run in enc.get().unwrap() {
        let (a, n) = share(&run.records, |r| r.attacked, OutcomeKind::LargeError);
        large += a;
        attacked += n;
    }
    let mut non_success = Vec::new();
    for run in std.get().unwrap() {
        let (s, n) = share(&run.records, |r| r.attacked, OutcomeKind::Success);
        non_success.push(1.0 - s as f64 / n as f64);
    }
    let pass = large == 0 && attacked > 0 && non_success.iter().all(|&x| x > 0.40);
    report(
        3,
        "encryption vs FBS",
        pass,
        format!(
            "encrypted LargeError {large}/{attacked}; standard non-success {:?}, need > 40%",
            non_success
                .iter()
                .map(|x| format!("{:.2}%", 100.0 * x))
                .collect::<Vec<_>>()
        ),
    );
    pass
}

fn c04_meaconing_projection() -> bool {
    let runs = runs(Setup::new(AttackKind::Meaconing, false, false));
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs.get().unwrap() {
        let err = run.report.attacked_median_error_m.unwrap_or(f64::NAN);
        let dist = run
            .report
            .attacked_median_attacker_distance_m
            .unwrap_or(f64::NAN);
        let large = run
            .report
            .attacked_outcome_shares
            .as_ref()
            .map_or(0.0, |s| s.large_error);
        pass &= (err - dist).abs() <= 25.0 && large >= 0.80;
        detail.push(format!(
            "median err {err:.1} m vs attacker {dist:.1} m, LargeError {:.2}%",
            100.0 * large
        ));
    }
    report(4, "meaconing projection", pass, format!("{detail:?}"));
    pass
}

fn c05_jamming_dos() -> bool {
    let runs = runs(Setup::new(AttackKind::Jamming, false, true));
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs.get().unwrap() {
        let dos = run
            .report
            .attacked_outcome_shares
            .as_ref()
            .map_or(0.0, |s| s.dos);
        let rates: BTreeMap<_, _> = Technique::ALL
            .iter()
            .map(|&t| {
                (
                    t.name(),
                    technique(&run.report, t)
                        .attacked_correct_rate
                        .unwrap_or(0.0),
                )
            })
            .collect();
        pass &= dos == 1.0 && rates.values().all(|&r| r == 1.0);
        detail.push(format!("DoS {:.2}% correct {rates:?}", 100.0 * dos));
    }
    report(5, "jamming DoS", pass, format!("{detail:?}"));
    pass
}

fn c06_meaconing_detection_ordering() -> bool {
    let runs = runs(Setup::new(AttackKind::Meaconing, false, true));
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs.get().unwrap() {
        let r = |t| {
            technique(&run.report, t)
                .attacked_correct_rate
                .unwrap_or(0.0)
        };
        let (absa, hs) = (r(Technique::Absa), r(Technique::Handshake));
        let (hmac, ds, trk) = (
            r(Technique::Hmac),
            r(Technique::DigitalSignature),
            r(Technique::Tracking),
        );
        let weak = hmac.max(ds).max(trk);
        pass &= absa >= 0.95 && hs >= 0.80 && hmac <= 0.60 && ds <= 0.60 && trk <= 0.60;
        pass &= absa > hs && hs > weak;
        detail.push(format!(
            "absa {:.1} hs {:.1} hmac {:.1} ds {:.1} tracking {:.1}",
            100.0 * absa,
            100.0 * hs,
            100.0 * hmac,
            100.0 * ds,
            100.0 * trk
        ));
    }
    report(
        6,
        "meaconing detection ordering",
        pass,
        format!("{detail:?}"),
    );
    pass
}

fn c07_false_alarms() -> bool {
    let mut pass = true;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for setup in [BENIGN_STD, BENIGN_ENC] {
        for run in runs(setup).get().unwrap() {
            for t in Technique::ALL {
                let m = technique(&run.report, t);
                let fa = m.false_alarm_rate.unwrap_or(f64::NAN);
                pass &= fa <= 0.08;
                let w = worst.entry(t.name()).or_insert(0.0);
                *w = w.max(fa);
            }
        }
    }
    report(
        7,
        "benign false alarms",
        pass,
        format!("worst per technique {worst:?}, need <= 0.08"),
    );
    pass
}

fn c08_correlation_statistics() -> bool {
    let mut rng = rng_from(808);
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [512usize, 1024, 4096] {
        let bits: Vec<u8> = (0..2 * n).map(|_| rng.gen_range(0..2u8)).collect();
        let plain = qpsk_map(&bits).unwrap();
        let auto = correlate(&plain, &plain).unwrap().norm_sqr();
        let st = crosscorr_variance_estimate(&plain, 1000, &mut rng).unwrap();
        let ratio = st.variance / n as f64;
        let auto_ok = (auto - (n * n) as f64).abs() <= 1e-9 * (n * n) as f64;
        pass &= (0.8..=1.2).contains(&ratio) && auto_ok;
        detail.push(format!(
            "N={n}: Var/N {ratio:.3}, |R_auto|^2/N^2 {:.12}",
            auto / (n * n) as f64
        ));
    }
    report(8, "correlation statistics", pass, format!("{detail:?}"));
    pass
}

fn c09_ldpc() -> bool {
    let mut rng = rng_from(909);
    let mut pass = true;
    let mut detail = Vec::new();
    for k in [128usize, 512] {
        let code = LdpcCode::new(k, 7).unwrap();
        let sigma2 = 1.0 / (2.0 * code.rate() * 10f64.powf(0.6));
        let (mut exact, mut errors) = (true, 0);
        for _ in 0..1000 {
            let info: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = code.encode(&info).unwrap();
            let clean: Vec<f64> = cw
                .iter()
                .map(|&b| if b == 0 { 20.0 } else { -20.0 })
                .collect();
            exact &= code.decode(&clean).unwrap().info == info;
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let y = (1.0 - 2.0 * b as f64) + complex_gaussian(&mut rng, 2.0 * sigma2).re;
                    2.0 * y / sigma2
                })
                .collect();
            let out = code.decode(&llrs).unwrap();
            errors += (!out.converged || out.info != info) as usize;
        }
        let fer = errors as f64 / 1000.0;
        pass &= exact && fer <= 1e-2 && code.max_iterations == 25;
        detail.push(format!(
            "k={k}: noiseless exact {exact}, FER {fer:.4} at 6 dB"
        ));
    }
    report(9, "LDPC", pass, format!("{detail:?}"));
    pass
}

fn c10_tracker_calibration() -> bool {
    let mut rng = rng_from(1010);
    let (dt, q, r) = (1.0, 1.0, 3.0);
    let f = prsloc::detect::cv_transition(dt);
    let mut truth = Vector4::new(0.0, 0.0, 8.0, -3.0);
    let mut ts = TrackState::new(&Point::new(0.0, 0.0), r, 10.0, f64::INFINITY, 2);
    ts.x[2] = 8.0;
    ts.x[3] = -3.0;
    let (warmup, n) = (50usize, 2000usize);
    let (mut sum, mut pass_count) = (0.0, 0usize);
    for k in 0..warmup + n {
        let ax: f64 = StandardNormal.sample(&mut rng);
        let ay: f64 = StandardNormal.sample(&mut rng);
        truth = f * truth + Vector4::new(0.5 * ax, 0.5 * ay, ax, ay) * (q * dt);
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        let z = Point::new(truth[0] + r * nx, truth[1] + r * ny);
        ts = kf_predict(&ts, dt, q).unwrap();
        let (next, v) = kf_update_gated(&ts, Some(&z), r);
        if k >= warmup {
            let nis = v.diagnostics["nis"];
            sum += nis;
            pass_count += (nis <= DEFAULT_GATE_GAMMA) as usize;
        }
        ts = next;
    }
    let mean = sum / n as f64;
    let frac = pass_count as f64 / n as f64;

    // Coasting runs: missing measurements and gated outliers.
    let mut gated = TrackState::new(&Point::new(0.0, 0.0), r, 10.0, DEFAULT_GATE_GAMMA, 2);
    let trace = |p: &Matrix4<f64>| p.trace();
    let mut monotone = true;
    let mut coasted = 0;
    for k in 0..60 {
        gated = kf_predict(&gated, dt, q).unwrap();
        let z = match k % 20 {
            0..=4 => Some(Point::new(0.0, 0.0)),
            5..=11 => None,
            _ => Some(Point::new(5e3, -5e3)),
        };
        let before = trace(&gated.p);
        let (next, _) = kf_update_gated(&gated, z.as_ref(), r);
        if next.coasting {
            coasted += 1;
            monotone &= trace(&next.p) >= before - 1e-9;
            let predicted = kf_predict(&next, dt, q).unwrap();
            monotone &= trace(&predicted.p) >= trace(&next.p) - 1e-9;
        }
        gated = next;
    }
    let pass = (mean - 2.0).abs() <= 0.15 && (frac - 0.85).abs() <= 0.05 && monotone && coasted > 0;
    report(
        10,
        "tracker calibration",
        pass,
        format!("NIS mean {mean:.3} over {n} epochs, gate pass {frac:.3} at {DEFAULT_GATE_GAMMA:.4}, trace(P) non-decreasing over {coasted} coasting epochs: {monotone}"),
    );
    pass
}

fn c11_solver_oracle() -> bool {
    let scenario = Scenario::prepare(&config(BENIGN_STD, 1)).unwrap();
    let topo = &scenario.topology;
    let mut rng = rng_from(1111);
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for _ in 0..100 {
        let anchor = &scenario.trajectory[rng.gen_range(0..scenario.trajectory.len())].xy_m;
        let ids = topo.serving_bs(anchor).unwrap();
        let sites = topo.positions(&ids).unwrap();
        // Uniform point in the serving triangle.
        let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
        if a + b > 1.0 {
            (a, b) = (1.0 - a, 1.0 - b);
        }
        let p = sites[0] + (sites[1] - sites[0]) * a + (sites[2] - sites[0]) * b;
        let bs: BTreeMap<u32, Point> = ids.iter().copied().zip(sites.iter().copied()).collect();
        let est = multilaterate(
            &synthesize_rstds(&p, &bs, ids[0]),
            &bs,
            &centroid(&sites),
            &SolverConfig::default(),
        )
        .unwrap();
        converged &= est.converged;
        worst = worst.max((est.xy_m - p).norm());
    }
    let bs: BTreeMap<u32, Point> = [(1, Point::new(0.0, 0.0)), (2, Point::new(500.0, 0.0))]
        .into_iter()
        .collect();
    let two = multilaterate(
        &synthesize_rstds(&Point::new(100.0, 50.0), &bs, 1),
        &bs,
        &Point::new(250.0, 0.0),
        &SolverConfig::default(),
    );
    let mut few_dos = two.is_err()
        && classify_outcome(None, &Point::new(100.0, 50.0), 15.0).kind == OutcomeKind::DoS;
    let mut few_epochs = 0;
    for setup in [Setup::new(AttackKind::Jamming, false, true), BENIGN_STD] {
        for run in runs(setup).get().unwrap() {
            for r in run.records.iter().filter(|r| r.detected_bs < 3) {
                few_epochs += 1;
                few_dos &= r.outcome.kind == OutcomeKind::DoS;
            }
        }
    }
    let pass = worst <= 0.01 && converged && few_dos;
    report(
        11,
        "solver oracle",
        pass,
        format!("max round-trip error {worst:.2e} m over 100 positions; < 3 BS -> DoS on {few_epochs} pipeline epochs and 2-site solve: {few_dos}"),
    );
    pass
}

fn c12_determinism() -> bool {
    let mut pass = true;
    let mut detail = Vec::new();
    for setup in [
        Setup::new(AttackKind::Meaconing, false, true),
        Setup::new(AttackKind::FbsSpoof, true, false),
    ] {
        let first = runs(setup);
        let again = execute(&config(setup, SEEDS[0]));
        let same = first.get().unwrap()[0].csv == again.csv;
        pass &= same && !again.csv.is_empty();
        detail.push(format!(
            "{}: {} bytes identical {same}",
            setup.attack.name(),
            again.csv.len()
        ));
    }
    report(12, "determinism", pass, format!("{detail:?}"));
    pass
}

fn main() {
    let criteria: [fn() -> bool; 12] = [
        c01_benign_accuracy,
        c02_encryption_equivalence,
        c03_encryption_vs_fbs,
        c04_meaconing_projection,
        c05_jamming_dos,
        c06_meaconing_detection_ordering,
        c07_false_alarms,
        c08_correlation_statistics,
        c09_ldpc,
        c10_tracker_calibration,
        c11_solver_oracle,
        c12_determinism,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
