//! Outcome shares, correct-decision rates and false alarms.

use std::collections::BTreeMap;

use super::{EpochRecord, Phase, ScenarioConfig};
use crate::locate::OutcomeKind;
use crate::{Error, Result, Technique};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PhaseShares {
    pub epochs: usize,
    pub success: f64,
    pub large_error: f64,
    pub dos: f64,
}

impl PhaseShares {
    fn of<'a>(records: impl Iterator<Item = &'a EpochRecord>) -> Option<Self> {
        let mut counts = [0usize; 3];
        for r in records {
            counts[match r.outcome.kind {
                OutcomeKind::Success => 0,
                OutcomeKind::LargeError => 1,
                OutcomeKind::DoS => 2,
            }] += 1;
        }
        let n: usize = counts.iter().sum();
        (n > 0).then(|| Self {
            epochs: n,
            success: counts[0] as f64 / n as f64,
            large_error: counts[1] as f64 / n as f64,
            dos: counts[2] as f64 / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TechniqueMetrics {
    /// Share of correct decisions per phase.
    pub correct_rate_by_phase: BTreeMap<String, f64>,
    /// Share of attacked epochs flagged invalid.
    pub attacked_correct_rate: Option<f64>,
    /// Share of non-attacked, non-DoS epochs flagged invalid.
    pub false_alarm_rate: Option<f64>,
    pub false_alarm_epochs: usize,
    pub false_alarm_denominator: usize,
    /// Share of attacked epochs with a large error that passed the check.
    pub accepted_wrong_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    pub attack_kind: String,
    pub epochs: usize,
    pub outcome_shares: BTreeMap<String, PhaseShares>,
    pub attacked_outcome_shares: Option<PhaseShares>,
    pub unattacked_outcome_shares: Option<PhaseShares>,
    pub attacked_median_error_m: Option<f64>,
    pub attacked_median_attacker_distance_m: Option<f64>,
    pub techniques: BTreeMap<String, TechniqueMetrics>,
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn correct(r: &EpochRecord, valid: bool) -> bool {
    valid != r.attacked
}

pub fn aggregate(records: &[EpochRecord], cfg: &ScenarioConfig) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::param("no epoch records to aggregate"));
    }
    let mut outcome_shares = BTreeMap::new();
    for phase in Phase::ALL {
        if let Some(s) = PhaseShares::of(records.iter().filter(|r| r.phase == phase)) {
            outcome_shares.insert(phase.name().to_string(), s);
        }
    }
    let attacked: Vec<&EpochRecord> = records.iter().filter(|r| r.attacked).collect();
    let errors = attacked.iter().filter_map(|r| r.outcome.error_m).collect();
    let distances = attacked
        .iter()
        .filter_map(|r| r.attacker.map(|a| (a - r.truth).norm()))
        .collect();
    let mut techniques = BTreeMap::new();
    for t in Technique::ALL {
        if !records.iter().any(|r| r.verdicts.contains_key(&t)) {
            continue;
        }
        let judged: Vec<(&EpochRecord, bool)> = records
            .iter()
            .filter_map(|r| r.verdicts.get(&t).map(|v| (r, v.valid)))
            .collect();
        let mut by_phase = BTreeMap::new();
        for phase in Phase::ALL {
            let in_phase: Vec<_> = judged.iter().filter(|(r, _)| r.phase == phase).collect();
            let ok = in_phase.iter().filter(|(r, v)| correct(r, *v)).count();
            if let Some(x) = rate(ok, in_phase.len()) {
                by_phase.insert(phase.name().to_string(), x);
            }
        }
        let att: Vec<_> = judged.iter().filter(|(r, _)| r.attacked).collect();
        let benign: Vec<_> = judged
            .iter()
            .filter(|(r, _)| !r.attacked && r.outcome.kind != OutcomeKind::DoS)
            .collect();
        let fa = benign.iter().filter(|(_, v)| !v).count();
        let wrong = att
            .iter()
            .filter(|(r, v)| *v && r.outcome.kind == OutcomeKind::LargeError)
            .count();
        techniques.insert(
            t.name().to_string(),
            TechniqueMetrics {
                correct_rate_by_phase: by_phase,
                attacked_correct_rate: rate(att.iter().filter(|(_, v)| !v).count(), att.len()),
                false_alarm_rate: rate(fa, benign.len()),
                false_alarm_epochs: fa,
                false_alarm_denominator: benign.len(),
                accepted_wrong_rate: rate(wrong, att.len()),
            },
        );
    }
    Ok(MetricsReport {
        attack_kind: cfg.attack.kind.name().to_string(),
        epochs: records.len(),
        outcome_shares,
        attacked_outcome_shares: PhaseShares::of(attacked.iter().copied()),
        unattacked_outcome_shares: PhaseShares::of(records.iter().filter(|r| !r.attacked)),
        attacked_median_error_m: median(errors),
        attacked_median_attacker_distance_m: median(distances),
        techniques,
    })
}
