//! Hearability threshold calibration on pure-noise windows.

use super::ScenarioConfig;
use crate::adversary::SlotId;
use crate::channel::add_noise;
use crate::prs_grid::{generate_prs_grid, modulate_slots, unit_power_gain, IqSignal, PrsConfig};
use crate::receiver::{measure_all, Replica};
use crate::rng::{derive_seed, rng_from, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KappaCalibration {
    pub trials: usize,
    /// Peak-to-floor ratios observed (one per replica per trial).
    pub samples: usize,
    pub mean_db: f64,
    pub p99_db: f64,
    pub max_db: f64,
    /// Maximum rounded up to the next 0.1 dB.
    pub recommended_kappa_db: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Run the full Doppler-scan receiver over `trials` windows of white noise
/// against three comb-multiplexed replicas and report the distribution of
/// the peak-to-floor statistic.
pub fn calibrate_kappa(cfg: &ScenarioConfig, trials: usize) -> Result<KappaCalibration> {
    if trials == 0 {
        return Err(Error::param("calibration needs at least one trial"));
    }
    cfg.validate()?;
    let num = cfg.numerology();
    let scenario_len = cfg.slots() * num.samples_per_slot() + cfg.receiver.window_for(&num) - 1;
    let slots: Vec<SlotId> = (0..cfg.slots() as u32)
        .map(|s| SlotId { slot: s, frame: 0 })
        .collect();
    let replicas = (0..3u32)
        .map(|c| {
            let mut prs = PrsConfig::new(101 + c, 2 * c as usize);
            prs.num_symbols = cfg.prs.num_symbols;
            prs.start_symbol = cfg.prs.start_symbol;
            let grids = slots
                .iter()
                .map(|s| generate_prs_grid(&prs, &num, s.slot, s.frame))
                .collect::<Result<Vec<_>>>()?;
            Ok(Replica {
                bs_id: 101 + c,
                samples: modulate_slots(&grids, &num, unit_power_gain(&prs, &num))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ratios = Vec::with_capacity(3 * trials);
    for t in 0..trials {
        let mut sig = IqSignal::zeros(scenario_len, num.sample_rate_hz);
        add_noise(
            &mut sig,
            1.0,
            &mut rng_from(derive_seed(cfg.seed, t as u64, Stream::Calibration)),
        );
        for m in measure_all(&sig, &replicas, &num, &cfg.receiver)? {
            ratios.push(m.toa.peak_to_floor_db);
        }
    }
    ratios.sort_by(f64::total_cmp);
    let max_db = *ratios.last().expect("non-empty");
    Ok(KappaCalibration {
        trials,
        samples: ratios.len(),
        mean_db: ratios.iter().sum::<f64>() / ratios.len() as f64,
        p99_db: quantile(&ratios, 0.99),
        max_db,
        recommended_kappa_db: (max_db * 10.0).floor() / 10.0 + 0.1,
    })
}
