//! CSV / JSON artifacts of a run.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{EpochRecord, MetricsReport, ScenarioConfig};
use crate::{Error, Result, Technique};

const FIXED_COLUMNS: [&str; 14] = [
    "epoch",
    "phase",
    "attacked",
    "truth_x_m",
    "truth_y_m",
    "estimate_x_m",
    "estimate_y_m",
    "outcome",
    "error_m",
    "serving",
    "detected_bs",
    "attacker_x_m",
    "attacker_y_m",
    "attacker_distance_m",
];

/// Column names of `epochs.csv`, in order.
pub fn epoch_columns() -> Vec<String> {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for t in Technique::ALL {
        cols.push(format!("{}_valid", t.name()));
        cols.push(format!("{}_reason", t.name()));
    }
    cols
}

pub const EPOCH_COLUMNS: usize = FIXED_COLUMNS.len() + 2 * Technique::ALL.len();

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn row(r: &EpochRecord) -> Vec<String> {
    let mut out = vec![
        r.epoch.to_string(),
        r.phase.name().to_string(),
        (r.attacked as u8).to_string(),
        f(r.truth.x),
        f(r.truth.y),
        opt(r.estimate.map(|p| p.x)),
        opt(r.estimate.map(|p| p.y)),
        r.outcome.kind.name().to_string(),
        opt(r.outcome.error_m),
        r.serving
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        r.detected_bs.to_string(),
        opt(r.attacker.map(|p| p.x)),
        opt(r.attacker.map(|p| p.y)),
        opt(r.attacker.map(|p| (p - r.truth).norm())),
    ];
    for t in Technique::ALL {
        match r.verdicts.get(&t) {
            Some(v) => {
                out.push((v.valid as u8).to_string());
                out.push(v.reason.clone().unwrap_or_default());
            }
            None => {
                out.push(String::new());
                out.push(String::new());
            }
        }
    }
    out
}

pub fn write_epochs_csv<W: Write>(
    records: &[EpochRecord],
    w: W,
) -> std::result::Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(epoch_columns())?;
    for r in records {
        wr.write_record(row(r))?;
    }
    wr.flush()?;
    Ok(())
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

/// Write `epochs.csv`, `metrics.json` and `config_resolved.json` into `out_dir`.
pub fn export(
    records: &[EpochRecord],
    report: &MetricsReport,
    resolved: &ScenarioConfig,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join("epochs.csv");
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_epochs_csv(records, file).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&csv_path, io),
        other => Error::Config(format!("{}: {other:?}", csv_path.display())),
    })?;
    let metrics = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        context: "metrics".into(),
        source,
    })?;
    write_json(&out_dir.join("metrics.json"), &metrics)?;
    write_json(&out_dir.join("config_resolved.json"), &resolved.to_json())
}
