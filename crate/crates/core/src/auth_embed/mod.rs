//! Authentication tags (HMAC-SHA-256 or Ed25519) carried in otherwise empty
//! PRS resource elements, protected by a rate-1/2 LDPC code.
//!
//! With comb-6 PRS, base station colour `c` in {0, 1, 2} transmits PRS on
//! residue class `2c` and its tags on class `2c + 1`, so three base stations
//! fill all six classes without collision.

mod ldpc;

pub use ldpc::{LdpcCode, LdpcDecodeResult};

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

use crate::prs_grid::{qpsk_map, Numerology, ResourceGrid};
use crate::{DetectionVerdict, Error, Result, Technique, C64};

type HmacSha256 = Hmac<Sha256>;

pub const HMAC_TAG_BITS: usize = 128;
pub const DS_TAG_BITS: usize = 512;
const MESSAGE_MAGIC: &[u8; 4] = b"PRS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthKind {
    Hmac,
    DigitalSignature,
}

impl AuthKind {
    pub fn technique(self) -> Technique {
        match self {
            AuthKind::Hmac => Technique::Hmac,
            AuthKind::DigitalSignature => Technique::DigitalSignature,
        }
    }

    pub fn tag_bits(self) -> usize {
        match self {
            AuthKind::Hmac => HMAC_TAG_BITS,
            AuthKind::DigitalSignature => DS_TAG_BITS,
        }
    }
}

/// Key material for one tag scheme.
#[derive(Clone)]
pub struct AuthScheme {
    pub kind: AuthKind,
    pub tag_bits: usize,
    hmac_key: Option<Vec<u8>>,
    signing_key: Option<SigningKey>,
    verify_key: Option<VerifyingKey>,
}

impl std::fmt::Debug for AuthScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthScheme")
            .field("kind", &self.kind)
            .field("tag_bits", &self.tag_bits)
            .field("has_signing_key", &self.signing_key.is_some())
            .finish_non_exhaustive()
    }
}

impl AuthScheme {
    pub fn hmac(key: &[u8]) -> Self {
        Self {
            kind: AuthKind::Hmac,
            tag_bits: HMAC_TAG_BITS,
            hmac_key: Some(key.to_vec()),
            signing_key: None,
            verify_key: None,
        }
    }

    pub fn signer(signing_key: SigningKey) -> Self {
        Self {
            kind: AuthKind::DigitalSignature,
            tag_bits: DS_TAG_BITS,
            verify_key: Some(signing_key.verifying_key()),
            signing_key: Some(signing_key),
            hmac_key: None,
        }
    }

    /// Per-BS signing key derived as SHA-256(seed || bs_id).
    pub fn signer_for_bs(seed: &[u8], bs_id: u32) -> Self {
        let mut h = Sha256::new();
        h.update(seed);
        h.update(bs_id.to_be_bytes());
        Self::signer(SigningKey::from_bytes(&h.finalize().into()))
    }

    /// Public-key-only view, as held by a UE.
    pub fn verifier(&self) -> Self {
        Self {
            signing_key: None,
            ..self.clone()
        }
    }

    pub fn verify_key(&self) -> Option<VerifyingKey> {
        self.verify_key
    }
}

/// Canonical message bound by a tag: magic, bs_id (u32), frame (u32),
/// slot (u16), n_id_seq (u16), all big-endian.
pub fn build_auth_message(bs_id: u32, frame: u32, slot: u32, n_id_seq: u32) -> Vec<u8> {
    let mut m = Vec::with_capacity(16);
    m.extend_from_slice(MESSAGE_MAGIC);
    m.extend_from_slice(&bs_id.to_be_bytes());
    m.extend_from_slice(&frame.to_be_bytes());
    m.extend_from_slice(&(slot as u16).to_be_bytes());
    m.extend_from_slice(&(n_id_seq as u16).to_be_bytes());
    m
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

pub fn compute_tag(scheme: &AuthScheme, msg: &[u8]) -> Result<Vec<u8>> {
    match scheme.kind {
        AuthKind::Hmac => {
            let key = scheme
                .hmac_key
                .as_ref()
                .ok_or(Error::MissingKey("HMAC key"))?;
            let mut mac =
                HmacSha256::new_from_slice(key).map_err(|e| Error::param(e.to_string()))?;
            mac.update(msg);
            let full = mac.finalize().into_bytes();
            Ok(bytes_to_bits(&full[..scheme.tag_bits / 8]))
        }
        AuthKind::DigitalSignature => {
            let sk = scheme
                .signing_key
                .as_ref()
                .ok_or(Error::MissingKey("signing key"))?;
            Ok(bytes_to_bits(&sk.sign(msg).to_bytes()))
        }
    }
}

pub fn verify_tag(scheme: &AuthScheme, msg: &[u8], tag_bits: &[u8]) -> Result<bool> {
    if tag_bits.len() != scheme.tag_bits {
        return Ok(false);
    }
    let tag = bits_to_bytes(tag_bits);
    match scheme.kind {
        AuthKind::Hmac => {
            let key = scheme
                .hmac_key
                .as_ref()
                .ok_or(Error::MissingKey("HMAC key"))?;
            let mut mac =
                HmacSha256::new_from_slice(key).map_err(|e| Error::param(e.to_string()))?;
            mac.update(msg);
            Ok(mac.verify_truncated_left(&tag).is_ok())
        }
        AuthKind::DigitalSignature => {
            let vk = scheme
                .verify_key
                .as_ref()
                .ok_or(Error::MissingKey("verifying key"))?;
            let bytes: [u8; 64] = tag
                .try_into()
                .map_err(|_| Error::param("signature length"))?;
            Ok(vk.verify(msg, &Signature::from_bytes(&bytes)).is_ok())
        }
    }
}

/// Comb-6 residue classes (PRS, tag) of base-station colour `color`.
pub fn comb_offsets(color: usize) -> (usize, usize) {
    (2 * (color % 3), 2 * (color % 3) + 1)
}

/// Enforce comb capacity: tags halve the number of orthogonal base stations.
pub fn check_tag_capacity(k_comb: usize, n_bs: usize, tags_enabled: bool) -> Result<()> {
    let limit = if tags_enabled { k_comb / 2 } else { k_comb };
    if n_bs > limit {
        return Err(Error::Config(format!(
            "{n_bs} base stations exceed comb-{k_comb} capacity of {limit}{}",
            if tags_enabled {
                " with tag embedding"
            } else {
                ""
            }
        )));
    }
    Ok(())
}

/// Resource elements reserved for one tag of one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMap {
    pub re_indices: Vec<(usize, usize)>,
    pub k_offset_sig: usize,
}

impl EmbeddingMap {
    pub fn capacity_bits(&self) -> usize {
        2 * self.re_indices.len()
    }
}

/// Every cell of residue class `k_offset_sig` over the PRS symbols.
pub fn tag_class_cells(
    num: &Numerology,
    k_comb: usize,
    k_offset_sig: usize,
    start_symbol: usize,
    num_symbols: usize,
) -> Vec<(usize, usize)> {
    let n_sc = num.n_subcarriers();
    (start_symbol..start_symbol + num_symbols)
        .flat_map(|l| (k_offset_sig..n_sc).step_by(k_comb).map(move |k| (k, l)))
        .collect()
}

/// Split of one base station's tag class into HMAC cells, signature cells
/// and unused cells (kept empty for noise estimation). The class is split
/// into alternating pools and each tag is spread evenly over its pool.
#[derive(Debug, Clone, PartialEq)]
pub struct TagLayout {
    pub hmac: EmbeddingMap,
    pub ds: EmbeddingMap,
    pub spare: Vec<(usize, usize)>,
}

impl TagLayout {
    pub fn new(
        class_cells: &[(usize, usize)],
        k_offset_sig: usize,
        hmac_cells: usize,
        ds_cells: usize,
    ) -> Result<Self> {
        let pool_a: Vec<_> = class_cells.iter().copied().step_by(2).collect();
        let pool_b: Vec<_> = class_cells.iter().copied().skip(1).step_by(2).collect();
        if hmac_cells > pool_a.len() || ds_cells > pool_b.len() {
            return Err(Error::CapacityMismatch {
                capacity_bits: 2 * class_cells.len(),
                payload_bits: 2 * (hmac_cells + ds_cells),
            });
        }
        let (hmac, spare_a) = spread(&pool_a, hmac_cells);
        let (ds, spare_b) = spread(&pool_b, ds_cells);
        let mut spare = [spare_a, spare_b].concat();
        spare.sort_by_key(|&(k, l)| (l, k));
        Ok(Self {
            hmac: EmbeddingMap {
                re_indices: hmac,
                k_offset_sig,
            },
            ds: EmbeddingMap {
                re_indices: ds,
                k_offset_sig,
            },
            spare,
        })
    }

    /// Layout for `color` sized for the default HMAC and signature codes.
    pub fn for_color(
        num: &Numerology,
        color: usize,
        start_symbol: usize,
        num_symbols: usize,
    ) -> Result<Self> {
        let (_, tag_offset) = comb_offsets(color);
        let cells = tag_class_cells(num, 6, tag_offset, start_symbol, num_symbols);
        Self::new(&cells, tag_offset, HMAC_TAG_BITS, DS_TAG_BITS)
    }

    pub fn map(&self, kind: AuthKind) -> &EmbeddingMap {
        match kind {
            AuthKind::Hmac => &self.hmac,
            AuthKind::DigitalSignature => &self.ds,
        }
    }
}

type Cells = Vec<(usize, usize)>;

/// Pick `count` cells evenly spaced through `pool`; return (picked, rest).
fn spread(pool: &[(usize, usize)], count: usize) -> (Cells, Cells) {
    let mut taken = vec![false; pool.len()];
    let picked = (0..count)
        .map(|i| {
            let j = i * pool.len() / count.max(1);
            taken[j] = true;
            pool[j]
        })
        .collect();
    let rest = pool
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(c, _)| *c)
        .collect();
    (picked, rest)
}

/// Write QPSK-mapped `coded_bits` into the map cells of `grid`.
pub fn embed_tag(
    grid: &ResourceGrid,
    map: &EmbeddingMap,
    coded_bits: &[u8],
) -> Result<ResourceGrid> {
    if coded_bits.len() != map.capacity_bits() {
        return Err(Error::CapacityMismatch {
            capacity_bits: map.capacity_bits(),
            payload_bits: coded_bits.len(),
        });
    }
    if let Some(&(k, l)) = map
        .re_indices
        .iter()
        .find(|&&(k, l)| grid.get(k, l) != C64::new(0.0, 0.0))
    {
        return Err(Error::param(format!(
            "tag cell ({k}, {l}) already occupied"
        )));
    }
    let mut out = grid.clone();
    out.place(&map.re_indices, &qpsk_map(coded_bits)?)?;
    Ok(out)
}

/// Bit LLRs from equalized tag cells with complex noise variance `noise_var`.
pub fn tag_llrs(grid: &ResourceGrid, map: &EmbeddingMap, noise_var: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::SQRT_2 / noise_var.max(1e-12);
    map.re_indices
        .iter()
        .flat_map(|&(k, l)| {
            let z = grid.get(k, l);
            [scale * z.re, scale * z.im]
        })
        .collect()
}

/// Encode and embed the tag of `msg` under `scheme`.
pub fn sign_and_embed(
    grid: &ResourceGrid,
    map: &EmbeddingMap,
    scheme: &AuthScheme,
    code: &LdpcCode,
    msg: &[u8],
) -> Result<ResourceGrid> {
    let tag = compute_tag(scheme, msg)?;
    embed_tag(grid, map, &code.encode(&tag)?)
}

/// Demodulate, decode and verify the tag in an equalized grid.
pub fn extract_and_verify(
    grid: &ResourceGrid,
    map: &EmbeddingMap,
    scheme: &AuthScheme,
    code: &LdpcCode,
    expected_msg: &[u8],
    noise_var: f64,
) -> DetectionVerdict {
    let technique = scheme.kind.technique();
    let llrs = tag_llrs(grid, map, noise_var);
    let decoded = match code.decode(&llrs) {
        Ok(d) => d,
        Err(e) => return DetectionVerdict::invalid(technique, format!("decode_error: {e}")),
    };
    let iters = decoded.iterations as f64;
    if !decoded.converged {
        return DetectionVerdict::invalid(technique, "decode_failure")
            .with_diag("ldpc_iterations", iters);
    }
    match verify_tag(scheme, expected_msg, &decoded.info) {
        Ok(true) => DetectionVerdict::valid(technique).with_diag("ldpc_iterations", iters),
        Ok(false) => {
            DetectionVerdict::invalid(technique, "tag_mismatch").with_diag("ldpc_iterations", iters)
        }
        Err(e) => DetectionVerdict::invalid(technique, format!("verify_error: {e}")),
    }
}
