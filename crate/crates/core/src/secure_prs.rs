//! AES-128-CTR encrypted PRS and the correlation statistics used to check
//! that encrypted sequences are noise-like to a receiver without the key.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::Rng;

use crate::prs_grid::{qpsk_demap_hard, qpsk_map};
use crate::{Error, Result, C64};

/// Key, nonce and first block counter of one encrypted PRS message.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub key: [u8; 16],
    pub nonce: [u8; 12],
    pub counter_base: u32,
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("key", &"<redacted>")
            .field("nonce", &hex::encode(self.nonce))
            .field("counter_base", &self.counter_base)
            .finish()
    }
}

impl KeyMaterial {
    pub fn new(key: [u8; 16], nonce: [u8; 12], counter_base: u32) -> Self {
        Self {
            key,
            nonce,
            counter_base,
        }
    }

    /// Nonce layout: bs_id (32) | frame (32) | slot (16) | zero (16).
    pub fn for_slot(key: [u8; 16], bs_id: u32, frame: u32, slot: u16) -> Self {
        let mut nonce = [0u8; 12];
        nonce[..4].copy_from_slice(&bs_id.to_be_bytes());
        nonce[4..8].copy_from_slice(&frame.to_be_bytes());
        nonce[8..10].copy_from_slice(&slot.to_be_bytes());
        Self::new(key, nonce, 0)
    }

    /// Fresh random key and nonce.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut key = [0u8; 16];
        let mut nonce = [0u8; 12];
        rng.fill(&mut key);
        rng.fill(&mut nonce);
        Self::new(key, nonce, 0)
    }
}

/// Parse a 32-hex-digit AES-128 key.
pub fn parse_key_hex(s: &str) -> Result<[u8; 16]> {
    let bytes = hex::decode(s.trim()).map_err(|e| Error::Config(format!("bad key hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| Error::Config(format!("AES key must be 16 bytes, got {}", b.len())))
}

/// Raw CTR keystream bytes covering `nblocks` 16-byte blocks.
pub fn keystream_bytes(km: &KeyMaterial, nblocks: usize) -> Result<Vec<u8>> {
    if u64::from(km.counter_base) + nblocks as u64 > 1u64 << 32 {
        return Err(Error::CounterExhausted {
            counter_base: km.counter_base,
            requested_blocks: nblocks as u64,
        });
    }
    let cipher = Aes128::new(GenericArray::from_slice(&km.key));
    let mut out = Vec::with_capacity(16 * nblocks);
    for i in 0..nblocks as u32 {
        let mut block = [0u8; 16];
        block[..12].copy_from_slice(&km.nonce);
        block[12..].copy_from_slice(&km.counter_base.wrapping_add(i).to_be_bytes());
        let mut b = GenericArray::from(block);
        cipher.encrypt_block(&mut b);
        out.extend_from_slice(&b);
    }
    Ok(out)
}

/// First `nbits` keystream bits, most significant bit of each byte first.
pub fn keystream(km: &KeyMaterial, nbits: usize) -> Result<Vec<u8>> {
    if nbits == 0 {
        return Err(Error::param("keystream length must be at least 1 bit"));
    }
    let bytes = keystream_bytes(km, nbits.div_ceil(128))?;
    Ok((0..nbits)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect())
}

/// Encrypted PRS symbols for one base station and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedPrsSequence {
    pub symbols: Vec<C64>,
    pub source_bits: Vec<u8>,
    pub bs_id: u32,
}

/// XOR `bits` with `stream` and QPSK-map the result.
pub fn encrypt_with_keystream(
    bits: &[u8],
    stream: &[u8],
    bs_id: u32,
) -> Result<EncryptedPrsSequence> {
    if bits.len() != stream.len() {
        return Err(Error::DimensionMismatch {
            expected: bits.len(),
            actual: stream.len(),
        });
    }
    let enc: Vec<u8> = bits.iter().zip(stream).map(|(a, b)| a ^ b).collect();
    Ok(EncryptedPrsSequence {
        symbols: qpsk_map(&enc)?,
        source_bits: bits.to_vec(),
        bs_id,
    })
}

pub fn encrypt_prs(bits: &[u8], km: &KeyMaterial, bs_id: u32) -> Result<EncryptedPrsSequence> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::param("PRS bitstream must have even length"));
    }
    encrypt_with_keystream(bits, &keystream(km, bits.len())?, bs_id)
}

/// Inner product `a^H b`.
pub fn correlate(a: &[C64], b: &[C64]) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
}

/// Monte-Carlo statistics of the plain/encrypted correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationStats {
    pub mean: C64,
    pub variance: f64,
    pub trials: usize,
}

/// Correlate `plain` against encrypted versions of itself under `trials`
/// fresh random keys drawn from `rng`.
pub fn crosscorr_variance_estimate<R: Rng + ?Sized>(
    plain: &[C64],
    trials: usize,
    rng: &mut R,
) -> Result<CorrelationStats> {
    if trials < 100 {
        return Err(Error::param(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let bits = qpsk_demap_hard(plain);
    let mut rs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let km = KeyMaterial::random(rng);
        let enc = encrypt_prs(&bits, &km, 0)?;
        rs.push(correlate(plain, &enc.symbols)?);
    }
    let mean = rs.iter().sum::<C64>() / trials as f64;
    let variance = rs.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / (trials - 1) as f64;
    Ok(CorrelationStats {
        mean,
        variance,
        trials,
    })
}
