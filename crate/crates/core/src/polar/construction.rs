//! Polar code construction by Gaussian-approximation density evolution.
//!
//! The generator is `G = F^{⊗m}` with `F = [[1,0],[1,1]]` and no bit-reversal,
//! so `u[0..N/2]` sits in the "check" (f) half of the first polarization step
//! and `u[N/2..N]` in the "variable" (g) half.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Design Es/N0 in dB for the per-bit BPSK channel used by the construction.
pub const DESIGN_SNR_DB: f64 = 0.0;

/// Chung's approximation of `phi(x) = 1 - E[tanh(L/2)]` for `L ~ N(x, 2x)`,
/// returned in the log domain so that large means do not underflow.
fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 10.0 {
        -0.4527 * x.powf(0.86) + 0.0218
    } else {
        0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

/// Inverse of `ln_phi` by bisection. `ln_phi` is decreasing in `x`.
fn ln_phi_inv(target: f64) -> f64 {
    if target >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ln_phi(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR of the check-node (f) child given parent mean `m`.
fn check_mean(m: f64) -> f64 {
    // 1 - (1 - phi)^2 = phi * (2 - phi), computed in the log domain.
    let lp = ln_phi(m);
    let p = lp.exp();
    ln_phi_inv(lp + (2.0 - p).ln())
}

fn validate_order_length(n: usize) -> Result<u32> {
    if !n.is_power_of_two() || !(2..=2048).contains(&n) {
        return Err(Error::InvalidBlockLength(n));
    }
    Ok(n.trailing_zeros())
}

/// Per-index GA mean LLR at the given design SNR (Es/N0 of one BPSK bit, dB).
pub fn ga_mean_llrs(n: usize, design_snr_db: f64) -> Result<Vec<f64>> {
    let m = validate_order_length(n)?;
    let es_n0 = 10f64.powf(design_snr_db / 10.0);
    let mut means = vec![4.0 * es_n0];
    for _ in 0..m {
        let mut next = Vec::with_capacity(means.len() * 2);
        // Each node's children are appended left (f) then right (g), so the
        // natural index of a leaf reads its f/g path from the MSB down.
        for &mu in &means {
            next.push(check_mean(mu));
            next.push(2.0 * mu);
        }
        means = next;
    }
    Ok(means)
}

/// Permutation of `0..n` sorted from least to most reliable.
pub fn build_reliability_order(n: usize) -> Result<Vec<usize>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<usize>>>>> = OnceLock::new();
    validate_order_length(n)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(order) = cache.lock().expect("construction cache poisoned").get(&n) {
        return Ok(order.as_ref().clone());
    }
    let means = ga_mean_llrs(n, DESIGN_SNR_DB)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    cache
        .lock()
        .expect("construction cache poisoned")
        .insert(n, Arc::new(order.clone()));
    Ok(order)
}
