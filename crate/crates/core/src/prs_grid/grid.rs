use std::collections::BTreeSet;

use super::{gold_sequence, prs_c_init, qpsk_map, Numerology};
use crate::{Error, Result, C64};

/// PRS resource configuration for one base station.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrsConfig {
    pub n_id_seq: u32,
    pub k_comb: usize,
    pub k_offset: usize,
    pub num_symbols: usize,
    pub start_symbol: usize,
    /// Slots (within the frame) carrying PRS; `None` means every slot.
    #[serde(default)]
    pub slots_active: Option<BTreeSet<u32>>,
}

impl PrsConfig {
    /// Comb-6, twelve symbols from symbol 0, active in every slot.
    pub fn new(n_id_seq: u32, k_offset: usize) -> Self {
        Self {
            n_id_seq,
            k_comb: 6,
            k_offset,
            num_symbols: 12,
            start_symbol: 0,
            slots_active: None,
        }
    }

    pub fn validate(&self, num: &Numerology) -> Result<()> {
        if self.n_id_seq > 4095 {
            return Err(Error::param(format!(
                "n_id_seq={} outside [0, 4095]",
                self.n_id_seq
            )));
        }
        if ![2, 4, 6, 12].contains(&self.k_comb) {
            return Err(Error::param(format!(
                "k_comb={} not in {{2,4,6,12}}",
                self.k_comb
            )));
        }
        if self.k_offset >= self.k_comb {
            return Err(Error::param(format!(
                "k_offset={} must be below k_comb={}",
                self.k_offset, self.k_comb
            )));
        }
        if self.num_symbols == 0 || self.start_symbol + self.num_symbols > num.symbols_per_slot {
            return Err(Error::param(format!(
                "symbols {}..{} exceed the {}-symbol slot",
                self.start_symbol,
                self.start_symbol + self.num_symbols,
                num.symbols_per_slot
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, slot: u32) -> bool {
        self.slots_active.as_ref().is_none_or(|s| s.contains(&slot))
    }

    /// PRS resource elements per OFDM symbol.
    pub fn res_per_symbol(&self, num: &Numerology) -> usize {
        num.n_subcarriers() / self.k_comb
    }
}

/// One slot of resource elements, stored symbol-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    pub cells: Vec<C64>,
    pub slot_index: u32,
    pub frame_index: u32,
}

impl ResourceGrid {
    pub fn zeros(num: &Numerology, slot_index: u32, frame_index: u32) -> Self {
        let n_subcarriers = num.n_subcarriers();
        Self {
            n_subcarriers,
            n_symbols: num.symbols_per_slot,
            cells: vec![C64::new(0.0, 0.0); n_subcarriers * num.symbols_per_slot],
            slot_index,
            frame_index,
        }
    }

    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        l * self.n_subcarriers + k
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.cells[self.index(k, l)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, v: C64) {
        let i = self.index(k, l);
        self.cells[i] = v;
    }

    pub fn symbol(&self, l: usize) -> &[C64] {
        &self.cells[l * self.n_subcarriers..(l + 1) * self.n_subcarriers]
    }

    pub fn energy(&self) -> f64 {
        self.cells.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn occupied(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for l in 0..self.n_symbols {
            for k in 0..self.n_subcarriers {
                if self.get(k, l) != C64::new(0.0, 0.0) {
                    out.insert((k, l));
                }
            }
        }
        out
    }

    /// Write `values` into `cells` in order.
    pub fn place(&mut self, cells: &[(usize, usize)], values: &[C64]) -> Result<()> {
        if cells.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: cells.len(),
                actual: values.len(),
            });
        }
        for (&(k, l), &v) in cells.iter().zip(values) {
            self.set(k, l, v);
        }
        Ok(())
    }

    pub fn gather(&self, cells: &[(usize, usize)]) -> Vec<C64> {
        cells.iter().map(|&(k, l)| self.get(k, l)).collect()
    }

    /// Element-wise sum of two grids of equal shape.
    pub fn add(&mut self, other: &ResourceGrid) -> Result<()> {
        if self.cells.len() != other.cells.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cells.len(),
                actual: other.cells.len(),
            });
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += *b;
        }
        Ok(())
    }
}

/// PRS resource elements of `cfg`, symbol-major with ascending subcarrier.
pub fn prs_cells(cfg: &PrsConfig, num: &Numerology) -> Vec<(usize, usize)> {
    let n_sc = num.n_subcarriers();
    (cfg.start_symbol..cfg.start_symbol + cfg.num_symbols)
        .flat_map(|l| {
            (cfg.k_offset..n_sc)
                .step_by(cfg.k_comb)
                .map(move |k| (k, l))
        })
        .collect()
}

/// Plain PRS bitstream of one slot: a fresh Gold sequence per symbol,
/// concatenated in symbol order (two bits per RE).
pub fn prs_slot_bits(cfg: &PrsConfig, num: &Numerology, slot: u32) -> Result<Vec<u8>> {
    cfg.validate(num)?;
    let per_symbol = cfg.res_per_symbol(num);
    let mut bits = Vec::with_capacity(2 * per_symbol * cfg.num_symbols);
    for l in cfg.start_symbol..cfg.start_symbol + cfg.num_symbols {
        let c_init = prs_c_init(cfg.n_id_seq, slot, l as u32, num.symbols_per_slot as u32)?;
        bits.extend(gold_sequence(c_init, 2 * per_symbol)?);
    }
    Ok(bits)
}

/// QPSK PRS symbols of one slot, aligned with [`prs_cells`].
pub fn prs_symbols(cfg: &PrsConfig, num: &Numerology, slot: u32) -> Result<Vec<C64>> {
    qpsk_map(&prs_slot_bits(cfg, num, slot)?)
}

/// Resource grid holding only the PRS of `cfg` for (`slot`, `frame`).
pub fn generate_prs_grid(
    cfg: &PrsConfig,
    num: &Numerology,
    slot: u32,
    frame: u32,
) -> Result<ResourceGrid> {
    cfg.validate(num)?;
    let mut grid = ResourceGrid::zeros(num, slot, frame);
    if cfg.is_active(slot) {
        grid.place(&prs_cells(cfg, num), &prs_symbols(cfg, num, slot)?)?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comb6_occupancy_count() {
        let num = Numerology::test_profile();
        let g = generate_prs_grid(&PrsConfig::new(17, 0), &num, 0, 0).unwrap();
        let occ = g.occupied();
        assert_eq!(occ.len(), 1248);
        for l in 0..12 {
            assert_eq!(occ.iter().filter(|c| c.1 == l).count(), 104);
        }
        assert!(occ.iter().all(|c| c.1 < 12));
        for &(k, l) in &occ {
            assert!((g.get(k, l).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn comb_offsets_are_disjoint_exhaustively() {
        let num = Numerology::test_profile();
        for comb in [2usize, 4, 6, 12] {
            for a in 0..comb {
                for b in (a + 1)..comb {
                    let mut ca = PrsConfig::new(1, a);
                    ca.k_comb = comb;
                    let mut cb = PrsConfig::new(2, b);
                    cb.k_comb = comb;
                    let sa: BTreeSet<_> = prs_cells(&ca, &num).into_iter().collect();
                    let sb: BTreeSet<_> = prs_cells(&cb, &num).into_iter().collect();
                    assert!(sa.is_disjoint(&sb), "comb {comb}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn distinct_sequences_per_symbol() {
        let num = Numerology::test_profile();
        let cfg = PrsConfig::new(301, 2);
        let bits = prs_slot_bits(&cfg, &num, 4).unwrap();
        let per = 2 * cfg.res_per_symbol(&num);
        for l in 0..12 {
            for m in (l + 1)..12 {
                let sl = prs_c_init(301, 4, l as u32, 14).unwrap();
                let sm = prs_c_init(301, 4, m as u32, 14).unwrap();
                assert_ne!(sl, sm);
                assert_ne!(bits[l * per..l * per + 64], bits[m * per..m * per + 64]);
            }
        }
    }

    #[test]
    fn deterministic_and_inactive_slots_empty() {
        let num = Numerology::test_profile();
        let mut cfg = PrsConfig::new(9, 3);
        let a = generate_prs_grid(&cfg, &num, 2, 5).unwrap();
        assert_eq!(a, generate_prs_grid(&cfg, &num, 2, 5).unwrap());
        cfg.slots_active = Some([0u32].into_iter().collect());
        assert_eq!(generate_prs_grid(&cfg, &num, 2, 5).unwrap().energy(), 0.0);
    }

    #[test]
    fn config_validation() {
        let num = Numerology::test_profile();
        let mut cfg = PrsConfig::new(1, 6);
        assert!(cfg.validate(&num).is_err());
        cfg.k_offset = 0;
        cfg.start_symbol = 3;
        assert!(cfg.validate(&num).is_err());
        cfg.start_symbol = 2;
        assert!(cfg.validate(&num).is_ok());
        cfg.k_comb = 3;
        assert!(cfg.validate(&num).is_err());
    }
}
