use crate::{Error, Result, C64};

/// Gold sequence warm-up length.
const NC: usize = 1600;
/// Largest slots-per-frame count of any NR numerology.
const MAX_SLOTS_PER_FRAME: u32 = 320;

/// PRS scrambling seed for sequence ID `n_id_seq`, slot `slot` and symbol
/// `symbol` (TS 38.211 7.4.1.7.2).
pub fn prs_c_init(n_id_seq: u32, slot: u32, symbol: u32, symbols_per_slot: u32) -> Result<u32> {
    if n_id_seq > 4095 {
        return Err(Error::param(format!(
            "n_id_seq={n_id_seq} outside [0, 4095]"
        )));
    }
    if slot >= MAX_SLOTS_PER_FRAME {
        return Err(Error::param(format!("slot={slot} outside the frame")));
    }
    if symbols_per_slot == 0 || symbol >= symbols_per_slot {
        return Err(Error::param(format!(
            "symbol={symbol} outside [0, {symbols_per_slot})"
        )));
    }
    let hi = u64::from(n_id_seq / 1024);
    let lo = u64::from(n_id_seq % 1024);
    let time = u64::from(symbols_per_slot * slot + symbol + 1);
    let v = (1u64 << 22) * hi + (1u64 << 10) * time * (2 * lo + 1) + lo;
    Ok((v % (1u64 << 31)) as u32)
}

/// Length-`length` pseudo-random sequence c(n) from the two 31-bit LFSRs
/// x1 (fixed seed) and x2 (seeded by `c_init`), after discarding the first
/// `NC` outputs. Bits are returned as 0/1 bytes.
pub fn gold_sequence(c_init: u32, length: usize) -> Result<Vec<u8>> {
    if length == 0 {
        return Err(Error::param("gold sequence length must be >= 1"));
    }
    if c_init >= 1 << 31 {
        return Err(Error::param(format!("c_init={c_init} exceeds 31 bits")));
    }
    // Bit i of each register holds x(n + i).
    let mut x1: u32 = 1;
    let mut x2: u32 = c_init;
    let step = |x1: &mut u32, x2: &mut u32| {
        let f1 = (*x1 ^ (*x1 >> 3)) & 1;
        let f2 = (*x2 ^ (*x2 >> 1) ^ (*x2 >> 2) ^ (*x2 >> 3)) & 1;
        *x1 = (*x1 >> 1) | (f1 << 30);
        *x2 = (*x2 >> 1) | (f2 << 30);
    };
    for _ in 0..NC {
        step(&mut x1, &mut x2);
    }
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        out.push(((x1 ^ x2) & 1) as u8);
        step(&mut x1, &mut x2);
    }
    Ok(out)
}

/// QPSK mapping of bit pairs: (1-2b0)/sqrt2 + j(1-2b1)/sqrt2.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::param(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            C64::new(
                a * (1.0 - 2.0 * f64::from(p[0] & 1)),
                a * (1.0 - 2.0 * f64::from(p[1] & 1)),
            )
        })
        .collect())
}

/// Hard-decision inverse of [`qpsk_map`].
pub fn qpsk_demap_hard(symbols: &[C64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}
