//! Multi-user detection: linear filters, CRC-gated successive interference
//! cancellation and message passing for sparse codebooks.

mod mpa;
mod sic;

use num_complex::Complex64;

pub use mpa::{codeword_bit_llrs, mpa_detect, scma_detect, MpaConfig, MpaOutput, MpaUser};
pub use sic::{sic_detect, SicConfig};

use crate::error::{check_len, Error, Result};
use crate::grid::{ResourceGrid, NUM_SUBCARRIERS};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot_conj};
use crate::qpsk::SoftSymbol;
use crate::schemes::{modulate_user, SignatureTables, UserTxConfig};

/// Linear per-symbol filter with its post-filter statistics for unit-power
/// symbols: `wᴴr = gain·x + e` with `E|e|² = gain²/sinr`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter {
    pub weights: Vec<Complex64>,
    pub gain: f64,
    pub sinr: f64,
}

impl LinearFilter {
    pub fn variance(&self) -> f64 {
        self.gain * self.gain / self.sinr
    }

    pub fn soft(&self, r: &[Complex64]) -> SoftSymbol {
        SoftSymbol::new(dot_conj(&self.weights, r), self.gain, self.variance())
    }
}

fn check_signatures(signatures: &[Vec<Complex64>], sigma2: f64, target: usize) -> Result<usize> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let t = signatures
        .get(target)
        .ok_or_else(|| Error::InvalidArgument(format!("target {target} out of range")))?;
    let d = t.len();
    for s in signatures {
        check_len("signature", d, s.len())?;
    }
    Ok(d)
}

/// `w = (Σ s sᴴ + σ²I)⁻¹ s_target`, `gain = s_targetᴴ w`, `SINR = gain/(1-gain)`.
pub fn build_mmse(
    signatures: &[Vec<Complex64>],
    sigma2: f64,
    target: usize,
) -> Result<LinearFilter> {
    let d = check_signatures(signatures, sigma2, target)?;
    let mut r = vec![Complex64::new(0.0, 0.0); d * d];
    for s in signatures {
        for i in 0..d {
            for j in 0..=i {
                r[i * d + j] += s[i] * s[j].conj();
            }
        }
    }
    for i in 0..d {
        r[i * d + i] += sigma2;
    }
    cholesky_in_place(&mut r, d)?;
    let mut w = signatures[target].clone();
    cholesky_solve(&r, d, &mut w);
    let gain = dot_conj(&signatures[target], &w).re;
    if !(gain < 1.0) {
        return Err(Error::Singular("MMSE gain reached one"));
    }
    Ok(LinearFilter {
        weights: w,
        gain,
        sinr: gain / (1.0 - gain),
    })
}

/// `w = s/‖s‖²`; SINR counts every other signature as interference.
pub fn build_mf(signatures: &[Vec<Complex64>], sigma2: f64, target: usize) -> Result<LinearFilter> {
    check_signatures(signatures, sigma2, target)?;
    let s = &signatures[target];
    let n2: f64 = s.iter().map(|x| x.norm_sqr()).sum();
    if n2 == 0.0 {
        return Err(Error::InvalidArgument("zero signature".into()));
    }
    let w: Vec<Complex64> = s.iter().map(|x| x / n2).collect();
    let interference: f64 = signatures
        .iter()
        .enumerate()
        .filter(|&(u, _)| u != target)
        .map(|(_, o)| dot_conj(&w, o).norm_sqr())
        .sum();
    Ok(LinearFilter {
        weights: w,
        gain: 1.0,
        sinr: 1.0 / (interference + sigma2 / n2),
    })
}

/// Inputs shared by all detectors for one frame.
#[derive(Debug, Clone, Copy)]
pub struct RxContext<'a> {
    pub users: &'a [UserTxConfig],
    /// `[user][antenna][subcarrier]`, power offsets included.
    pub csi: &'a [Vec<Vec<Complex64>>],
    /// Noise variance per resource element, estimation error included.
    pub sigma2: f64,
    pub tables: &'a SignatureTables,
}

impl RxContext<'_> {
    pub fn num_rx(&self) -> usize {
        self.csi.first().map_or(0, |c| c.len())
    }

    fn validate(&self, received: &[ResourceGrid]) -> Result<()> {
        check_len("CSI users", self.users.len(), self.csi.len())?;
        for c in self.csi {
            check_len("CSI antennas", received.len(), c.len())?;
            for h in c {
                check_len("CSI subcarriers", NUM_SUBCARRIERS, h.len())?;
            }
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidArgument(
                "receiver noise variance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Final decision for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDecision {
    pub info: Vec<u8>,
    pub payload: Vec<u8>,
    pub crc_ok: bool,
    /// Decoder invocations spent on this user.
    pub attempts: usize,
}

/// Per-antenna contribution of one user given a decided codeword.
pub fn reconstruct(
    user: &UserTxConfig,
    codeword: &[u8],
    csi: &[Vec<Complex64>],
    tables: &SignatureTables,
) -> Result<Vec<ResourceGrid>> {
    let x = modulate_user(user, codeword, tables)?;
    csi.iter()
        .map(|h| {
            check_len("CSI subcarriers", NUM_SUBCARRIERS, h.len())?;
            let mut g = x.clone();
            for t in 0..g.num_symbols() {
                for (v, hv) in g.symbol_mut(t).iter_mut().zip(h) {
                    *v *= hv;
                }
            }
            Ok(g)
        })
        .collect()
}
