//! Polar coding with CRC-aided list decoding and per-user frozen-bit values.

mod construction;
pub mod crc;
mod scl;

use std::sync::Arc;

use rand::Rng;

pub use construction::{build_reliability_order, ga_mean_llrs, DESIGN_SNR_DB};
pub use crc::{crc16, crc16_attach, crc16_check, CRC_LEN};
pub use scl::{scl_decode, SclDecoder, SclOutput};

use crate::error::{check_len, Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Geometry of one polar code: block length, information length (CRC
/// included) and the frozen set derived from the reliability order.
#[derive(Debug, Clone)]
pub struct PolarCodeConfig {
    n: usize,
    k: usize,
    crc_length: usize,
    reliability_order: Arc<Vec<usize>>,
    frozen_set: Vec<usize>,
    info_set: Vec<usize>,
    is_frozen: Vec<bool>,
}

impl PolarCodeConfig {
    /// `k` counts the CRC bits. `crc_length` is 0 or 16.
    pub fn new(n: usize, k: usize, crc_length: usize) -> Result<Self> {
        if !n.is_power_of_two() || !(8..=2048).contains(&n) {
            return Err(Error::InvalidBlockLength(n));
        }
        if crc_length != 0 && crc_length != CRC_LEN {
            return Err(Error::InvalidCode(format!(
                "unsupported CRC length {crc_length}"
            )));
        }
        if k <= crc_length || k > n {
            return Err(Error::InvalidCode(format!(
                "need crc_length < K <= N, got K={k}, N={n}, crc={crc_length}"
            )));
        }
        let order = build_reliability_order(n)?;
        let mut is_frozen = vec![true; n];
        for &i in &order[n - k..] {
            is_frozen[i] = false;
        }
        let frozen_set: Vec<usize> = (0..n).filter(|&i| is_frozen[i]).collect();
        let info_set: Vec<usize> = (0..n).filter(|&i| !is_frozen[i]).collect();
        Ok(Self {
            n,
            k,
            crc_length,
            reliability_order: Arc::new(order),
            frozen_set,
            info_set,
            is_frozen,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn crc_length(&self) -> usize {
        self.crc_length
    }

    /// Payload bits carried per block (`K - crc_length`).
    pub fn payload_len(&self) -> usize {
        self.k - self.crc_length
    }

    pub fn reliability_order(&self) -> &[usize] {
        &self.reliability_order
    }

    /// Sorted frozen indices.
    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    /// Sorted information indices.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.is_frozen[i]
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Attaches the CRC (if any) to a payload, producing the K-bit info block.
    pub fn attach_crc(&self, payload: &[u8]) -> Result<Vec<u8>> {
        check_len("payload", self.payload_len(), payload.len())?;
        if self.crc_length == 0 {
            Ok(payload.to_vec())
        } else {
            crc16_attach(payload)
        }
    }

    /// CRC verdict for a K-bit info block; always true without a CRC.
    pub fn check_crc(&self, info: &[u8]) -> Result<bool> {
        check_len("info block", self.k, info.len())?;
        if self.crc_length == 0 {
            Ok(true)
        } else {
            crc16_check(info)
        }
    }
}

/// Values placed on the frozen positions of one user's code, aligned with the
/// sorted frozen set. All zeros is conventional polar coding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrozenSignature {
    pub user_id: usize,
    pub values: Vec<u8>,
}

impl FrozenSignature {
    pub fn zeros(user_id: usize, cfg: &PolarCodeConfig) -> Self {
        Self {
            user_id,
            values: vec![0; cfg.frozen_set().len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    fn check(&self, cfg: &PolarCodeConfig) -> Result<()> {
        check_len(
            "frozen signature",
            cfg.frozen_set().len(),
            self.values.len(),
        )
    }
}

/// How frozen values are chosen per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureMode {
    /// All-zero frozen bits for every user.
    Conventional,
    /// Seeded pseudo-random bit pattern per user.
    Random,
}

/// Deterministic frozen-bit signature for `user_id`.
pub fn make_signature(
    user_id: usize,
    seed: u64,
    cfg: &PolarCodeConfig,
    mode: SignatureMode,
) -> FrozenSignature {
    match mode {
        SignatureMode::Conventional => FrozenSignature::zeros(user_id, cfg),
        SignatureMode::Random => {
            let mut rng = StreamKey::new(seed, Purpose::FrozenSignature)
                .user(user_id as u64)
                .antenna(cfg.n() as u64)
                .rng();
            FrozenSignature {
                user_id,
                values: (0..cfg.frozen_set().len())
                    .map(|_| rng.gen::<bool>() as u8)
                    .collect(),
            }
        }
    }
}

/// In-place `x = u F^{⊗m}` over GF(2).
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// Builds the input vector `u`: info bits on the information set (ascending
/// index order) and signature values on the frozen set.
pub fn assemble_input(
    info: &[u8],
    cfg: &PolarCodeConfig,
    sig: &FrozenSignature,
) -> Result<Vec<u8>> {
    check_len("info block", cfg.k(), info.len())?;
    sig.check(cfg)?;
    let mut u = vec![0u8; cfg.n()];
    for (&i, &b) in cfg.info_set().iter().zip(info) {
        u[i] = b & 1;
    }
    for (&i, &b) in cfg.frozen_set().iter().zip(&sig.values) {
        u[i] = b & 1;
    }
    Ok(u)
}

/// Encodes a K-bit info block (CRC already attached) into an N-bit codeword.
pub fn polar_encode(info: &[u8], cfg: &PolarCodeConfig, sig: &FrozenSignature) -> Result<Vec<u8>> {
    let mut u = assemble_input(info, cfg, sig)?;
    polar_transform(&mut u);
    Ok(u)
}
