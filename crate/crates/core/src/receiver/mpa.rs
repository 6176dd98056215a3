//! Message passing detection for sparse codebooks.
//!
//! Sum-product over the factor graph of one codeword slot. Factor
//! likelihoods are evaluated once per slot and scaled by their maximum, so
//! the iterations run in the probability domain without overflow.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::grid::ResourceGrid;
use crate::polar::SclDecoder;
use crate::schemes::{Scheme, SignatureMaterial, GROUPS_PER_SYMBOL, GROUP_SIZE, SPREAD_SYMBOLS};

use super::{RxContext, UserDecision};

/// MPA knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpaConfig {
    pub max_iterations: usize,
    /// Stop once no message moves by more than this.
    pub tolerance: f64,
}

impl Default for MpaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 8,
            tolerance: 1e-6,
        }
    }
}

/// One user's view of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MpaUser {
    /// Observation indices the user is connected to.
    pub resources: Vec<usize>,
    /// `[codeword][resource][antenna]`: received contribution of each codeword
    /// on each connected resource, channel included.
    pub codewords: Vec<Vec<Vec<Complex64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpaOutput {
    /// `[user][codeword]`, normalized.
    pub posteriors: Vec<Vec<f64>>,
    pub iterations: usize,
}

struct Factor {
    // (user, position of this factor in the user's resource list)
    edges: Vec<(usize, usize)>,
    // Likelihood per joint codeword choice, first edge varies slowest.
    lik: Vec<f64>,
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Sum-product detection of one slot.
///
/// `obs[re][antenna]` holds the received samples; `sigma2` is the complex
/// noise variance per sample.
pub fn mpa_detect(
    obs: &[Vec<Complex64>],
    users: &[MpaUser],
    sigma2: f64,
    cfg: &MpaConfig,
) -> Result<MpaOutput> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let num_rx = obs.first().map_or(0, |o| o.len());
    let j = users.first().map_or(0, |u| u.codewords.len());
    if j == 0 {
        return Err(Error::InvalidArgument(
            "MPA needs at least one user and codeword".into(),
        ));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); obs.len()];
    for (u, user) in users.iter().enumerate() {
        check_len("codewords", j, user.codewords.len())?;
        for cw in &user.codewords {
            check_len("codeword resources", user.resources.len(), cw.len())?;
            for r in cw {
                check_len("antennas", num_rx, r.len())?;
            }
        }
        for (p, &re) in user.resources.iter().enumerate() {
            adj.get_mut(re)
                .ok_or_else(|| Error::InvalidArgument(format!("resource {re} out of range")))?
                .push((u, p));
        }
    }

    let factors: Vec<Factor> = adj
        .into_iter()
        .enumerate()
        .filter(|(_, e)| !e.is_empty())
        .map(|(re, edges)| {
            let d = edges.len();
            let combos = j.pow(d as u32);
            let mut dist = vec![0.0; combos];
            let mut choice = vec![0usize; d];
            for (c, slot) in dist.iter_mut().enumerate() {
                let mut rem = c;
                for x in choice.iter_mut().rev() {
                    *x = rem % j;
                    rem /= j;
                }
                *slot = (0..num_rx)
                    .map(|a| {
                        let s: Complex64 = edges
                            .iter()
                            .zip(&choice)
                            .map(|(&(u, p), &cj)| users[u].codewords[cj][p][a])
                            .sum();
                        (obs[re][a] - s).norm_sqr()
                    })
                    .sum::<f64>()
                    / sigma2;
            }
            let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
            Factor {
                edges,
                lik: dist.iter().map(|x| (best - x).exp()).collect(),
            }
        })
        .collect();

    // Messages indexed by (factor, edge).
    let uniform = 1.0 / j as f64;
    let mut v2f: Vec<Vec<Vec<f64>>> = factors
        .iter()
        .map(|f| vec![vec![uniform; j]; f.edges.len()])
        .collect();
    let mut f2v: Vec<Vec<Vec<f64>>> = v2f.clone();
    // For each user, the (factor, edge) pairs it is attached to.
    let mut user_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); users.len()];
    for (fi, f) in factors.iter().enumerate() {
        for (e, &(u, _)) in f.edges.iter().enumerate() {
            user_edges[u].push((fi, e));
        }
    }

    let mut iterations = 0;
    let mut choice = Vec::new();
    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for (fi, f) in factors.iter().enumerate() {
            let d = f.edges.len();
            choice.resize(d, 0);
            let mut out = vec![vec![0.0; j]; d];
            for (c, &l) in f.lik.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let mut rem = c;
                for x in choice.iter_mut().rev() {
                    *x = rem % j;
                    rem /= j;
                }
                for e in 0..d {
                    let mut w = l;
                    for (e2, &cj) in choice.iter().enumerate() {
                        if e2 != e {
                            w *= v2f[fi][e2][cj];
                        }
                    }
                    out[e][choice[e]] += w;
                }
            }
            for (e, mut m) in out.into_iter().enumerate() {
                normalize(&mut m);
                for (a, b) in m.iter().zip(&f2v[fi][e]) {
                    delta = delta.max((a - b).abs());
                }
                f2v[fi][e] = m;
            }
        }
        for edges in &user_edges {
            for &(fi, e) in edges {
                let mut m = vec![1.0; j];
                for &(fo, eo) in edges {
                    if (fo, eo) != (fi, e) {
                        m.iter_mut().zip(&f2v[fo][eo]).for_each(|(x, y)| *x *= y);
                    }
                }
                normalize(&mut m);
                v2f[fi][e] = m;
            }
        }
        if delta < cfg.tolerance {
            break;
        }
    }

    let posteriors = user_edges
        .iter()
        .map(|edges| {
            let mut p = vec![1.0; j];
            for &(fi, e) in edges {
                p.iter_mut().zip(&f2v[fi][e]).for_each(|(x, y)| *x *= y);
            }
            normalize(&mut p);
            p
        })
        .collect();
    Ok(MpaOutput {
        posteriors,
        iterations,
    })
}

const LLR_CLIP: f64 = 50.0;

/// Bit LLRs (positive favours 0, MSB first) from codeword posteriors.
pub fn codeword_bit_llrs(posterior: &[f64]) -> Vec<f64> {
    let j = posterior.len();
    let b = j.trailing_zeros() as usize;
    (0..b)
        .rev()
        .map(|s| {
            let (mut p0, mut p1) = (0.0, 0.0);
            for (idx, &p) in posterior.iter().enumerate() {
                if (idx >> s) & 1 == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
            match (p0 > 0.0, p1 > 0.0) {
                (true, true) => (p0.ln() - p1.ln()).clamp(-LLR_CLIP, LLR_CLIP),
                (true, false) => LLR_CLIP,
                (false, true) => -LLR_CLIP,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// Joint detection of all SCMA users of a frame followed by per-user list
/// decoding. No cancellation is attempted.
pub fn scma_detect(
    received: &[ResourceGrid],
    ctx: &RxContext,
    decoder: &mut SclDecoder,
    cfg: &MpaConfig,
) -> Result<Vec<UserDecision>> {
    ctx.validate(received)?;
    let amp = Scheme::Scma.tx_amplitude();
    let mut books = Vec::with_capacity(ctx.users.len());
    for u in ctx.users {
        match u.material {
            SignatureMaterial::Codebook(c) if c < ctx.tables.scma.num_users() => {
                books.push((ctx.tables.scma.user(c), ctx.tables.scma.support(c)))
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "MPA expects SCMA users with valid codebooks".into(),
                ))
            }
        }
    }
    let num_rx = ctx.num_rx();
    let mut llrs: Vec<Vec<f64>> = vec![Vec::with_capacity(decoder.config().n()); ctx.users.len()];
    let mut obs = vec![vec![Complex64::new(0.0, 0.0); num_rx]; GROUP_SIZE];
    for k in 0..SPREAD_SYMBOLS {
        let (g, t) = (k % GROUPS_PER_SYMBOL, k / GROUPS_PER_SYMBOL);
        for (i, o) in obs.iter_mut().enumerate() {
            for (a, v) in o.iter_mut().enumerate() {
                *v = received[a].get(g * GROUP_SIZE + i, t);
            }
        }
        let users: Vec<MpaUser> = books
            .iter()
            .enumerate()
            .map(|(u, (book, support))| MpaUser {
                resources: support.clone(),
                codewords: book
                    .iter()
                    .map(|cw| {
                        support
                            .iter()
                            .map(|&r| {
                                (0..num_rx)
                                    .map(|a| cw[r] * amp * ctx.csi[u][a][g * GROUP_SIZE + r])
                                    .collect()
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        let out = mpa_detect(&obs, &users, ctx.sigma2, cfg)?;
        for (l, p) in llrs.iter_mut().zip(&out.posteriors) {
            l.extend(codeword_bit_llrs(p));
        }
    }
    llrs.iter()
        .zip(ctx.users)
        .map(|(l, u)| {
            let out = decoder.decode(l, &u.frozen)?;
            Ok(UserDecision {
                info: out.info,
                payload: out.payload,
                crc_ok: out.crc_ok,
                attempts: 1,
            })
        })
        .collect()
}
