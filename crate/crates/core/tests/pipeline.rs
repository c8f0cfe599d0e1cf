//! End-to-end harness behaviour on short trajectories.

use prsloc::adversary::AttackKind;
use prsloc::harness::{
    aggregate, epoch_columns, export, run_scenario, EpochRecord, Phase, Scenario, ScenarioConfig,
    SecurityToggles, TrajectorySource, EPOCH_COLUMNS,
};
use prsloc::scenario::{write_trajectory, SyntheticTrajectory};
use prsloc::Technique;

fn short(n: usize, attack: AttackKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        seed: 7,
        trajectory: TrajectorySource::Synthetic(SyntheticTrajectory {
            n_points: n,
            ..Default::default()
        }),
        security: SecurityToggles::all_detections(),
        ..Default::default()
    };
    cfg.attack.kind = attack;
    cfg
}

fn read_csv(path: &std::path::Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn export_layout_and_reproduction() {
    let cfg = short(16, AttackKind::Meaconing);
    let scenario = Scenario::prepare(&cfg).unwrap();
    let records = scenario.run().unwrap();
    let report = aggregate(&records, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&records, &report, &scenario.resolved_config(), dir.path()).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("epochs.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, epoch_columns());
    assert_eq!(header.len(), EPOCH_COLUMNS);
    assert_eq!(header[0], "epoch");
    assert_eq!(header[EPOCH_COLUMNS - 1], "tracking_reason");
    let rows = read_csv(&dir.path().join("epochs.csv"));
    assert_eq!(rows.len(), 16);

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["epochs"], 16);
    assert_eq!(metrics["attack_kind"], "meaconing");

    let resolved = ScenarioConfig::load(&dir.path().join("config_resolved.json")).unwrap();
    let again = run_scenario(&resolved).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    export(
        &again,
        &aggregate(&again, &resolved).unwrap(),
        &resolved,
        dir2.path(),
    )
    .unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("epochs.csv")).unwrap(),
        std::fs::read(dir2.path().join("epochs.csv")).unwrap()
    );
}

#[test]
fn shares_and_phases_are_consistent() {
    let cfg = short(20, AttackKind::Jamming);
    let records = run_scenario(&cfg).unwrap();
    let report = aggregate(&records, &cfg).unwrap();
    for s in report.outcome_shares.values() {
        assert!((s.success + s.large_error + s.dos - 1.0).abs() < 1e-12);
    }
    let attacked: Vec<&EpochRecord> = records.iter().filter(|r| r.attacked).collect();
    assert!(!attacked.is_empty());
    assert!(attacked
        .iter()
        .all(|r| r.phase == Phase::Attack && r.attacker.is_some()));
    assert!(records
        .iter()
        .filter(|r| !r.attacked)
        .all(|r| r.attacker.is_none()));
    assert!(records
        .iter()
        .all(|r| r.verdicts.len() == Technique::ALL.len()));
    assert_eq!(
        records.iter().map(|r| r.epoch).collect::<Vec<_>>(),
        (1..=20).collect::<Vec<_>>()
    );
}

#[test]
fn trajectory_file_matches_synthetic_source() {
    let synth = SyntheticTrajectory {
        n_points: 12,
        ..Default::default()
    };
    let points = synth.generate(3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("drive.csv");
    write_trajectory(&path, &points).unwrap();

    let mut from_file = short(12, AttackKind::None);
    from_file.trajectory = TrajectorySource::File(path);
    let records = run_scenario(&from_file).unwrap();
    assert_eq!(records.len(), 12);
    for (r, p) in records.iter().zip(&points) {
        assert!((r.truth - p.xy_m).norm() < 1e-6);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(ScenarioConfig::from_json(r#"{"sead": 3}"#, "test").is_err());
    assert!(ScenarioConfig::from_json(r#"{"attack": {"kind": "teleport"}}"#, "test").is_err());
    let cfg = ScenarioConfig::default();
    assert!(cfg.with_override("thresholds.no_such_key", "1").is_err());
    let swept = cfg.with_override("attack.power_dbm", "40").unwrap();
    assert_eq!(swept.attack.power_dbm, 40.0);
}
