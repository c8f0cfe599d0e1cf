//! Rate-1/2 (3,6)-regular LDPC code with sum-product decoding.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::rng_from;
use crate::{Error, Result};

const VAR_DEGREE: usize = 3;
const CHECK_DEGREE: usize = 6;
const MAX_CONSTRUCTION_ATTEMPTS: u64 = 200;
const LLR_CLIP: f64 = 30.0;

/// A binary LDPC code of length `n = 2k` described by its parity checks.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub n: usize,
    pub k: usize,
    /// Variable indices of each parity check.
    pub checks: Vec<Vec<usize>>,
    pub max_iterations: usize,
    /// Codeword positions carrying the information bits, ascending.
    pub info_positions: Vec<usize>,
    /// For each parity position, the info-bit mask whose parity gives it.
    parity_rules: Vec<(usize, Vec<u64>)>,
    var_edges: Vec<Vec<usize>>,
    edge_var: Vec<usize>,
    check_edges: Vec<Vec<usize>>,
}

fn words(nbits: usize) -> usize {
    nbits.div_ceil(64)
}

#[inline]
fn get_bit(row: &[u64], i: usize) -> bool {
    (row[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
fn set_bit(row: &mut [u64], i: usize) {
    row[i / 64] |= 1 << (i % 64);
}

/// Random (3,6)-regular Tanner graph free of 4-cycles, or `None` on a dead end.
fn build_graph<R: Rng>(n: usize, m: usize, rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut var_checks: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut check_vars: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut blocked = vec![false; m];
    for &v in &order {
        for _ in 0..VAR_DEGREE {
            // Checks adjacent (through another variable) to v's current checks
            // would close a 4-cycle.
            blocked.iter_mut().for_each(|b| *b = false);
            for &c in &var_checks[v] {
                blocked[c] = true;
                for &u in &check_vars[c] {
                    for &c2 in &var_checks[u] {
                        blocked[c2] = true;
                    }
                }
            }
            let best_room = (0..m)
                .filter(|&c| !blocked[c])
                .map(|c| CHECK_DEGREE - check_vars[c].len())
                .max()
                .filter(|&r| r > 0)?;
            let candidates: Vec<usize> = (0..m)
                .filter(|&c| !blocked[c] && CHECK_DEGREE - check_vars[c].len() == best_room)
                .collect();
            let c = *candidates.choose(rng)?;
            var_checks[v].push(c);
            check_vars[c].push(v);
        }
    }
    for vars in &mut check_vars {
        vars.sort_unstable();
    }
    Some(check_vars)
}

/// Reduce H over GF(2). Returns pivot columns and reduced rows, or `None`
/// if H is rank deficient.
fn eliminate(checks: &[Vec<usize>], n: usize) -> Option<(Vec<usize>, Vec<Vec<u64>>)> {
    let m = checks.len();
    let mut rows: Vec<Vec<u64>> = checks
        .iter()
        .map(|vars| {
            let mut r = vec![0u64; words(n)];
            vars.iter().for_each(|&v| set_bit(&mut r, v));
            r
        })
        .collect();
    let mut pivots = Vec::with_capacity(m);
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let Some(p) = (rank..m).find(|&r| get_bit(&rows[r], col)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && get_bit(row, col) {
                row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
            }
        }
        pivots.push(col);
        rank += 1;
    }
    (rank == m).then_some((pivots, rows))
}

impl LdpcCode {
    /// Construct a code with `k` information bits from `seed`.
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k < 8 {
            return Err(Error::param(format!("LDPC dimension {k} too small")));
        }
        let n = 2 * k;
        let m = n - k;
        for attempt in 0..MAX_CONSTRUCTION_ATTEMPTS {
            let mut rng = rng_from(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
            let Some(checks) = build_graph(n, m, &mut rng) else {
                continue;
            };
            let Some((pivots, rows)) = eliminate(&checks, n) else {
                continue;
            };
            return Ok(Self::from_parts(n, k, checks, pivots, rows));
        }
        Err(Error::param(format!(
            "no full-rank (3,6) code of length {n} found"
        )))
    }

    fn from_parts(
        n: usize,
        k: usize,
        checks: Vec<Vec<usize>>,
        pivots: Vec<usize>,
        rows: Vec<Vec<u64>>,
    ) -> Self {
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let parity_rules = pivots
            .iter()
            .zip(&rows)
            .map(|(&p, row)| {
                let mut mask = vec![0u64; words(k)];
                for (j, &c) in info_positions.iter().enumerate() {
                    if get_bit(row, c) {
                        set_bit(&mut mask, j);
                    }
                }
                (p, mask)
            })
            .collect();
        let mut edge_var = Vec::new();
        let mut check_edges = Vec::with_capacity(checks.len());
        let mut var_edges = vec![Vec::new(); n];
        for vars in &checks {
            let mut es = Vec::with_capacity(vars.len());
            for &v in vars {
                var_edges[v].push(edge_var.len());
                es.push(edge_var.len());
                edge_var.push(v);
            }
            check_edges.push(es);
        }
        Self {
            n,
            k,
            checks,
            max_iterations: 25,
            info_positions,
            parity_rules,
            var_edges,
            edge_var,
            check_edges,
        }
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// H·c over GF(2), one bit per check.
    pub fn syndrome(&self, codeword: &[u8]) -> Vec<u8> {
        self.checks
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (codeword[v] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, codeword: &[u8]) -> bool {
        codeword.len() == self.n && self.syndrome(codeword).iter().all(|&s| s == 0)
    }

    /// Systematic encoding: `info` appears at [`Self::info_positions`].
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: info.len(),
            });
        }
        let mut packed = vec![0u64; words(self.k)];
        for (j, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                set_bit(&mut packed, j);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (p, mask) in &self.parity_rules {
            let ones: u32 = mask
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            cw[*p] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// Sum-product decoding of channel LLRs (positive favours bit 0).
    /// A posterior LLR of exactly zero counts as an erasure, so no
    /// information (all-zero input) never reports convergence.
    pub fn decode(&self, llrs: &[f64]) -> Result<LdpcDecodeResult> {
        if llrs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: llrs.len(),
            });
        }
        let channel: Vec<f64> = llrs
            .iter()
            .map(|l| {
                if l.is_finite() {
                    l.clamp(-LLR_CLIP, LLR_CLIP)
                } else {
                    0.0
                }
            })
            .collect();
        let n_edges = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| channel[v]).collect();
        let mut c2v = vec![0.0; n_edges];
        let mut posterior = channel.clone();
        let mut hard = vec![0u8; self.n];
        let mut iterations = 0;
        let mut converged = false;
        for it in 1..=self.max_iterations {
            iterations = it;
            for es in &self.check_edges {
                let t: Vec<f64> = es.iter().map(|&e| (v2c[e] / 2.0).tanh()).collect();
                for (i, &e) in es.iter().enumerate() {
                    let prod: f64 = t
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, x)| x)
                        .product();
                    let p = prod.clamp(-0.999_999_999_999, 0.999_999_999_999);
                    c2v[e] = 2.0 * p.atanh();
                }
            }
            for v in 0..self.n {
                let total = channel[v] + self.var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                posterior[v] = total;
                for &e in &self.var_edges[v] {
                    v2c[e] = (total - c2v[e]).clamp(-LLR_CLIP, LLR_CLIP);
                }
                hard[v] = (total < 0.0) as u8;
            }
            if posterior.iter().all(|&l| l != 0.0) && self.is_codeword(&hard) {
                converged = true;
                break;
            }
        }
        Ok(LdpcDecodeResult {
            info: self.extract_info(&hard),
            codeword: hard,
            converged,
            iterations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcDecodeResult {
    pub info: Vec<u8>,
    pub codeword: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_gaussian;

    fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    #[test]
    fn structure_is_regular_and_four_cycle_free() {
        let code = LdpcCode::new(128, 1).unwrap();
        assert_eq!(code.n, 256);
        assert_eq!(code.info_positions.len(), 128);
        assert!(code.checks.iter().all(|c| c.len() == CHECK_DEGREE));
        assert!(code.var_edges.iter().all(|e| e.len() == VAR_DEGREE));
        for a in 0..code.checks.len() {
            for b in (a + 1)..code.checks.len() {
                let shared = code.checks[a]
                    .iter()
                    .filter(|v| code.checks[b].contains(v))
                    .count();
                assert!(shared <= 1, "checks {a},{b} share {shared} variables");
            }
        }
    }

    #[test]
    fn encoding_is_linear_and_valid() {
        let code = LdpcCode::new(128, 3).unwrap();
        let mut rng = rng_from(4);
        assert!(code.encode(&[0; 128]).unwrap().iter().all(|&b| b == 0));
        for _ in 0..100 {
            let x = random_bits(&mut rng, 128);
            let y = random_bits(&mut rng, 128);
            let cx = code.encode(&x).unwrap();
            let cy = code.encode(&y).unwrap();
            assert!(code.is_codeword(&cx));
            assert_eq!(code.extract_info(&cx), x);
            let sum: Vec<u8> = cx.iter().zip(&cy).map(|(a, b)| a ^ b).collect();
            assert!(code.is_codeword(&sum));
        }
        assert!(code.encode(&[0; 5]).is_err());
    }

    #[test]
    fn noiseless_decode_and_erasure() {
        let code = LdpcCode::new(512, 9).unwrap();
        let mut rng = rng_from(5);
        let x = random_bits(&mut rng, 512);
        let cw = code.encode(&x).unwrap();
        let llrs: Vec<f64> = cw
            .iter()
            .map(|&b| if b == 0 { 8.0 } else { -8.0 })
            .collect();
        let out = code.decode(&llrs).unwrap();
        assert!(out.converged);
        assert_eq!(out.info, x);
        assert!(!code.decode(&vec![0.0; code.n]).unwrap().converged);
    }

    #[test]
    fn corrects_moderate_noise() {
        let code = LdpcCode::new(128, 2).unwrap();
        let mut rng = rng_from(6);
        // Eb/N0 = 6 dB at rate 1/2 with BPSK.
        let sigma2 = 1.0 / (2.0 * 0.5 * 10f64.powf(0.6));
        let mut errors = 0;
        for _ in 0..200 {
            let x = random_bits(&mut rng, 128);
            let cw = code.encode(&x).unwrap();
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let y = (1.0 - 2.0 * b as f64) + complex_gaussian(&mut rng, 2.0 * sigma2).re;
                    2.0 * y / sigma2
                })
                .collect();
            let out = code.decode(&llrs).unwrap();
            if !out.converged || out.info != x {
                errors += 1;
            }
        }
        assert!(errors <= 2, "{errors} frame errors");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = LdpcCode::new(128, 77).unwrap();
        let b = LdpcCode::new(128, 77).unwrap();
        assert_eq!(a.checks, b.checks);
        assert_eq!(a.info_positions, b.info_positions);
    }
}
