//! Gray-mapped QPSK and max-log soft demapping.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `(b0, b1) -> ((1-2b0) + j(1-2b1))/√2`.
#[inline]
pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(
        (1.0 - 2.0 * (b0 & 1) as f64) * INV_SQRT2,
        (1.0 - 2.0 * (b1 & 1) as f64) * INV_SQRT2,
    )
}

pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|p| qpsk_symbol(p[0], p[1]))
        .collect())
}

/// Post-filter observation `y = gain·s + n` with `E|n|² = variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSymbol {
    pub y: Complex64,
    pub gain: f64,
    pub variance: f64,
}

impl SoftSymbol {
    pub fn new(y: Complex64, gain: f64, variance: f64) -> Self {
        Self { y, gain, variance }
    }
}

/// Per-bit LLRs (positive favours 0), two per observation.
pub fn qpsk_soft_demap(obs: &[SoftSymbol]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(obs.len() * 2);
    for o in obs {
        if !(o.variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "demapper variance must be positive, got {}",
                o.variance
            )));
        }
        let scale = 2.0 * std::f64::consts::SQRT_2 * o.gain / o.variance;
        out.push(scale * o.y.re);
        out.push(scale * o.y.im);
    }
    Ok(out)
}

/// Nearest-point hard decision, used by the uncoded calibration path.
pub fn qpsk_hard(y: Complex64) -> (u8, u8) {
    ((y.re < 0.0) as u8, (y.im < 0.0) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn mapping_points() {
        let s = qpsk_map(&[0, 0, 1, 1, 0, 1]).unwrap();
        assert!((s[0] - Complex64::new(INV_SQRT2, INV_SQRT2)).norm() < 1e-15);
        assert!((s[1] - Complex64::new(-INV_SQRT2, -INV_SQRT2)).norm() < 1e-15);
        assert!((s[2] - Complex64::new(INV_SQRT2, -INV_SQRT2)).norm() < 1e-15);
        assert!(qpsk_map(&[0, 1, 1]).is_err());
    }

    #[test]
    fn unit_energy_block() {
        let bits: Vec<u8> = (0..512).map(|i| (i % 3 == 0) as u8).collect();
        let s = qpsk_map(&bits).unwrap();
        assert_eq!(s.len(), 256);
        assert!(s.iter().all(|x| (x.norm_sqr() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn clean_symbol_llrs() {
        let sigma2 = 0.3;
        let llr = qpsk_soft_demap(&[SoftSymbol::new(qpsk_symbol(0, 0), 1.0, sigma2)]).unwrap();
        assert!((llr[0] - 2.0 / sigma2).abs() < 1e-12);
        assert!((llr[1] - 2.0 / sigma2).abs() < 1e-12);
        let edge = qpsk_soft_demap(&[SoftSymbol::new(Complex64::new(0.0, 0.4), 1.0, 1.0)]).unwrap();
        assert_eq!(edge[0], 0.0);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        for v in [0.0, -1.0, f64::NAN] {
            assert!(qpsk_soft_demap(&[SoftSymbol::new(Complex64::new(1.0, 0.0), 1.0, v)]).is_err());
        }
    }

    #[test]
    fn map_demap_consistency_and_scaling() {
        for b0 in 0..2u8 {
            for b1 in 0..2u8 {
                let s = qpsk_symbol(b0, b1);
                let l1 = qpsk_soft_demap(&[SoftSymbol::new(s, 1.0, 0.5)]).unwrap();
                assert_eq!(((l1[0] < 0.0) as u8, (l1[1] < 0.0) as u8), (b0, b1));
                let l2 = qpsk_soft_demap(&[SoftSymbol::new(s, 1.0, 1.0)]).unwrap();
                assert!((l1[0] - 2.0 * l2[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn llr_signs_match_minimum_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let es_n0 = 10f64.powf(0.3);
        let sigma2 = 1.0 / es_n0;
        let pts: Vec<Complex64> = (0..4)
            .map(|m| qpsk_symbol((m >> 1) as u8, (m & 1) as u8))
            .collect();
        for _ in 0..5000 {
            let m = rng.gen_range(0..4);
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            let y = pts[m] + Complex64::new(nr, ni) * (sigma2 / 2.0).sqrt();
            let nearest = (0..4)
                .min_by(|&a, &b| (y - pts[a]).norm().total_cmp(&(y - pts[b]).norm()))
                .unwrap();
            let llr = qpsk_soft_demap(&[SoftSymbol::new(y, 1.0, sigma2)]).unwrap();
            let hard = ((llr[0] < 0.0) as usize) << 1 | (llr[1] < 0.0) as usize;
            assert_eq!(hard, nearest);
        }
    }
}
