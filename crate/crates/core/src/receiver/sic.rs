//! SINR-ordered, CRC-gated successive interference cancellation.
//!
//! Group-mapped and direct schemes use per-slot MMSE filters. A slot is one
//! 4-subcarrier group (spread schemes) or one resource element (direct
//! schemes), stacked over receive antennas. Filters of the remaining users
//! are updated by a rank-one downdate after each cancellation. RDMA uses
//! matched filtering over the four repetitions of each symbol.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, NUM_DATA_SYMBOLS, NUM_SUBCARRIERS};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot_conj};
use crate::polar::SclDecoder;
use crate::qpsk::{qpsk_soft_demap, SoftSymbol};
use crate::schemes::{
    rdma_subcarrier, Scheme, SignatureMaterial, GROUPS_PER_SYMBOL, GROUP_SIZE, RDMA_REPETITIONS,
    SPREAD_SYMBOLS,
};

use super::{reconstruct, RxContext, UserDecision};

/// SIC knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SicConfig {
    /// Passes over the users; later passes retry users that failed.
    pub outer_iterations: usize,
}

impl Default for SicConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 2,
        }
    }
}

const MIN_VARIANCE: f64 = 1e-12;

fn effective_sinr(sinrs: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for s in sinrs {
        acc += (1.0 + s.max(0.0)).ln();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64).exp() - 1.0
    }
}

struct MmseEngine {
    num_rx: usize,
    res_per_slot: usize,
    num_slots: usize,
    num_users: usize,
    dim: usize,
    sigma2: f64,
    // [slot][user][dim]
    sig: Vec<Complex64>,
    filt: Vec<Complex64>,
    // [slot][user]
    mu: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl MmseEngine {
    fn new(ctx: &RxContext, scheme: Scheme) -> Result<Self> {
        let num_rx = ctx.num_rx();
        let (res_per_slot, num_slots) = if scheme.is_spread() {
            (GROUP_SIZE, SPREAD_SYMBOLS)
        } else {
            (1, NUM_SUBCARRIERS * NUM_DATA_SYMBOLS)
        };
        let dim = res_per_slot * num_rx;
        let num_users = ctx.users.len();
        let amp = scheme.tx_amplitude();
        let weights: Vec<Vec<Complex64>> = ctx
            .users
            .iter()
            .map(|u| match &u.material {
                SignatureMaterial::Direct => Ok(vec![Complex64::new(amp, 0.0)]),
                m => m
                    .group_weights()
                    .map(|w| w.iter().map(|x| x * amp).collect())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!("{} has no linear signature", u.scheme))
                    }),
            })
            .collect::<Result<_>>()?;
        let mut sig = vec![Complex64::new(0.0, 0.0); num_slots * num_users * dim];
        for k in 0..num_slots {
            for (u, w) in weights.iter().enumerate() {
                let base = (k * num_users + u) * dim;
                for a in 0..num_rx {
                    for (i, wi) in w.iter().enumerate() {
                        let (sc, _) = Self::slot_re(res_per_slot, k, i);
                        sig[base + a * res_per_slot + i] = wi * ctx.csi[u][a][sc];
                    }
                }
            }
        }
        Ok(Self {
            num_rx,
            res_per_slot,
            num_slots,
            num_users,
            dim,
            sigma2: ctx.sigma2,
            filt: vec![Complex64::new(0.0, 0.0); sig.len()],
            sig,
            mu: vec![0.0; num_slots * num_users],
            scratch: vec![Complex64::new(0.0, 0.0); dim * dim],
        })
    }

    /// `(subcarrier, symbol)` of resource `i` of slot `k`.
    #[inline]
    fn slot_re(res_per_slot: usize, k: usize, i: usize) -> (usize, usize) {
        if res_per_slot == 1 {
            (k % NUM_SUBCARRIERS, k / NUM_SUBCARRIERS)
        } else {
            (
                (k % GROUPS_PER_SYMBOL) * GROUP_SIZE + i,
                k / GROUPS_PER_SYMBOL,
            )
        }
    }

    fn refresh_slot(&mut self, k: usize, active: &[bool]) -> Result<()> {
        let (d, nu) = (self.dim, self.num_users);
        let r = &mut self.scratch;
        r.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for u in (0..nu).filter(|&u| active[u]) {
            let s = &self.sig[(k * nu + u) * d..(k * nu + u + 1) * d];
            for i in 0..d {
                for j in 0..=i {
                    r[i * d + j] += s[i] * s[j].conj();
                }
            }
        }
        for i in 0..d {
            r[i * d + i] += self.sigma2;
        }
        cholesky_in_place(r, d)?;
        for u in (0..nu).filter(|&u| active[u]) {
            let base = (k * nu + u) * d;
            let (s, f) = (&self.sig[base..base + d], &mut self.filt[base..base + d]);
            f.copy_from_slice(s);
            cholesky_solve(r, d, f);
            self.mu[k * nu + u] = dot_conj(s, f).re.clamp(0.0, 1.0 - 1e-15);
        }
        Ok(())
    }

    fn refresh(&mut self, active: &[bool]) -> Result<()> {
        for k in 0..self.num_slots {
            self.refresh_slot(k, active)?;
        }
        Ok(())
    }

    fn cancel(&mut self, c: usize, active: &[bool]) -> Result<()> {
        let (d, nu) = (self.dim, self.num_users);
        for k in 0..self.num_slots {
            let mc = self.mu[k * nu + c];
            let denom = 1.0 - mc;
            if denom < 1e-8 {
                self.refresh_slot(k, active)?;
                continue;
            }
            let tc: Vec<Complex64> = self.filt[(k * nu + c) * d..(k * nu + c + 1) * d].to_vec();
            for u in (0..nu).filter(|&u| active[u]) {
                let base = (k * nu + u) * d;
                let beta = dot_conj(&tc, &self.sig[base..base + d]);
                let scale = beta / denom;
                for (f, t) in self.filt[base..base + d].iter_mut().zip(&tc) {
                    *f += t * scale;
                }
                let m = &mut self.mu[k * nu + u];
                *m = (*m + beta.norm_sqr() / denom).clamp(0.0, 1.0 - 1e-15);
            }
        }
        Ok(())
    }

    fn effective_sinr(&self, u: usize) -> f64 {
        let nu = self.num_users;
        effective_sinr((0..self.num_slots).map(|k| {
            let m = self.mu[k * nu + u];
            m / (1.0 - m)
        }))
    }

    fn soft_symbols(&self, u: usize, residual: &[ResourceGrid]) -> Vec<SoftSymbol> {
        let (d, nu) = (self.dim, self.num_users);
        let mut r = vec![Complex64::new(0.0, 0.0); d];
        (0..self.num_slots)
            .map(|k| {
                for a in 0..self.num_rx {
                    for i in 0..self.res_per_slot {
                        let (sc, t) = Self::slot_re(self.res_per_slot, k, i);
                        r[a * self.res_per_slot + i] = residual[a].get(sc, t);
                    }
                }
                let base = (k * nu + u) * d;
                let y = dot_conj(&self.filt[base..base + d], &r);
                let m = self.mu[k * nu + u];
                SoftSymbol::new(y, m, (m * (1.0 - m)).max(MIN_VARIANCE))
            })
            .collect()
    }
}

struct MfEngine {
    num_rx: usize,
    num_users: usize,
    sigma2: f64,
    shifts: Vec<usize>,
    // [user][antenna][subcarrier], transmit amplitude of one copy folded in.
    gains: Vec<Vec<Vec<Complex64>>>,
    // [user][symbol]
    norm2: Vec<f64>,
    interference: Vec<f64>,
}

impl MfEngine {
    fn new(ctx: &RxContext) -> Result<Self> {
        let copy_amp = 0.5 * Scheme::Rdma.tx_amplitude();
        let shifts = ctx
            .users
            .iter()
            .map(|u| match u.material {
                SignatureMaterial::Shift(s) => Ok(s),
                _ => Err(Error::InvalidArgument("MF-SIC expects RDMA users".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let gains: Vec<Vec<Vec<Complex64>>> = ctx
            .csi
            .iter()
            .map(|per_ant| {
                per_ant
                    .iter()
                    .map(|h| h.iter().map(|v| v * copy_amp).collect())
                    .collect()
            })
            .collect();
        let num_users = ctx.users.len();
        let num_rx = ctx.num_rx();
        let mut norm2 = vec![0.0; num_users * SPREAD_SYMBOLS];
        for u in 0..num_users {
            for k in 0..SPREAD_SYMBOLS {
                norm2[u * SPREAD_SYMBOLS + k] = (0..RDMA_REPETITIONS)
                    .map(|r| {
                        let sc = rdma_subcarrier(k, r, shifts[u]);
                        (0..num_rx).map(|a| gains[u][a][sc].norm_sqr()).sum::<f64>()
                    })
                    .sum();
            }
        }
        Ok(Self {
            num_rx,
            num_users,
            sigma2: ctx.sigma2,
            shifts,
            gains,
            norm2,
            interference: vec![0.0; num_users * SPREAD_SYMBOLS],
        })
    }

    /// `Σ_k' |s_{u,k}ᴴ s_{v,k'}|² / ‖s_{u,k}‖⁴` over the symbols of `v` that
    /// share a resource with symbol `k` of `u`.
    fn coupling(&self, u: usize, k: usize, v: usize) -> f64 {
        let mut terms: [(usize, Complex64); RDMA_REPETITIONS] =
            [(usize::MAX, Complex64::new(0.0, 0.0)); RDMA_REPETITIONS];
        let mut used = 0;
        for r in 0..RDMA_REPETITIONS {
            let sc = rdma_subcarrier(k, r, self.shifts[u]);
            let kv = (sc + NUM_SUBCARRIERS * RDMA_REPETITIONS
                - (r * self.shifts[v]) % NUM_SUBCARRIERS)
                % NUM_SUBCARRIERS;
            let c: Complex64 = (0..self.num_rx)
                .map(|a| self.gains[u][a][sc].conj() * self.gains[v][a][sc])
                .sum();
            match terms[..used].iter_mut().find(|t| t.0 == kv) {
                Some(t) => t.1 += c,
                None => {
                    terms[used] = (kv, c);
                    used += 1;
                }
            }
        }
        let n2 = self.norm2[u * SPREAD_SYMBOLS + k];
        if n2 == 0.0 {
            return 0.0;
        }
        terms[..used].iter().map(|t| t.1.norm_sqr()).sum::<f64>() / (n2 * n2)
    }

    fn refresh(&mut self, active: &[bool]) {
        for u in 0..self.num_users {
            for k in 0..SPREAD_SYMBOLS {
                self.interference[u * SPREAD_SYMBOLS + k] = (0..self.num_users)
                    .filter(|&v| v != u && active[v])
                    .map(|v| self.coupling(u, k, v))
                    .sum();
            }
        }
    }

    fn cancel(&mut self, c: usize, active: &[bool]) {
        for u in (0..self.num_users).filter(|&u| active[u] && u != c) {
            for k in 0..SPREAD_SYMBOLS {
                let i = self.coupling(u, k, c);
                let slot = &mut self.interference[u * SPREAD_SYMBOLS + k];
                *slot = (*slot - i).max(0.0);
            }
        }
    }

    fn variance(&self, u: usize, k: usize) -> f64 {
        let n2 = self.norm2[u * SPREAD_SYMBOLS + k];
        if n2 == 0.0 {
            return f64::INFINITY;
        }
        self.interference[u * SPREAD_SYMBOLS + k] + self.sigma2 / n2
    }

    fn effective_sinr(&self, u: usize) -> f64 {
        effective_sinr((0..SPREAD_SYMBOLS).map(|k| 1.0 / self.variance(u, k)))
    }

    fn soft_symbols(&self, u: usize, residual: &[ResourceGrid]) -> Vec<SoftSymbol> {
        (0..SPREAD_SYMBOLS)
            .map(|k| {
                let n2 = self.norm2[u * SPREAD_SYMBOLS + k];
                let mut y = Complex64::new(0.0, 0.0);
                for r in 0..RDMA_REPETITIONS {
                    let sc = rdma_subcarrier(k, r, self.shifts[u]);
                    for a in 0..self.num_rx {
                        y += self.gains[u][a][sc].conj() * residual[a].get(sc, r);
                    }
                }
                let var = self.variance(u, k);
                if n2 == 0.0 || !var.is_finite() {
                    // No energy on this symbol: an uninformative observation.
                    SoftSymbol::new(Complex64::new(0.0, 0.0), 0.0, 1.0)
                } else {
                    SoftSymbol::new(y / n2, 1.0, var.max(MIN_VARIANCE))
                }
            })
            .collect()
    }
}

enum Engine {
    Mmse(MmseEngine),
    Mf(MfEngine),
}

impl Engine {
    fn refresh(&mut self, active: &[bool]) -> Result<()> {
        match self {
            Engine::Mmse(e) => e.refresh(active),
            Engine::Mf(e) => {
                e.refresh(active);
                Ok(())
            }
        }
    }

    fn cancel(&mut self, c: usize, active: &[bool]) -> Result<()> {
        match self {
            Engine::Mmse(e) => e.cancel(c, active),
            Engine::Mf(e) => {
                e.cancel(c, active);
                Ok(())
            }
        }
    }

    fn effective_sinr(&self, u: usize) -> f64 {
        match self {
            Engine::Mmse(e) => e.effective_sinr(u),
            Engine::Mf(e) => e.effective_sinr(u),
        }
    }

    fn soft_symbols(&self, u: usize, residual: &[ResourceGrid]) -> Vec<SoftSymbol> {
        match self {
            Engine::Mmse(e) => e.soft_symbols(u, residual),
            Engine::Mf(e) => e.soft_symbols(u, residual),
        }
    }
}

/// Runs SIC over all users of one frame. Every user is attempted at most once
/// per pass, strongest effective SINR first, with the ordering re-evaluated
/// after each cancellation. Users whose CRC fails are retried in later passes
/// against the reduced residual. Returns one decision per user.
pub fn sic_detect(
    received: &[ResourceGrid],
    ctx: &RxContext,
    decoder: &mut SclDecoder,
    cfg: &SicConfig,
    mut trace: Option<&mut Vec<String>>,
) -> Result<Vec<UserDecision>> {
    ctx.validate(received)?;
    let nu = ctx.users.len();
    let scheme = ctx
        .users
        .first()
        .map(|u| u.scheme)
        .ok_or_else(|| Error::InvalidArgument("no users to detect".into()))?;
    if ctx.users.iter().any(|u| u.scheme != scheme) {
        return Err(Error::InvalidArgument("mixed schemes in one frame".into()));
    }
    let mut engine = match scheme {
        Scheme::Rdma => Engine::Mf(MfEngine::new(ctx)?),
        Scheme::Scma => return Err(Error::InvalidArgument("SCMA is detected with MPA".into())),
        _ => Engine::Mmse(MmseEngine::new(ctx, scheme)?),
    };
    let code = decoder.config().clone();
    let mut residual: Vec<ResourceGrid> = received.to_vec();
    let mut active = vec![true; nu];
    let mut decisions: Vec<UserDecision> = (0..nu)
        .map(|_| UserDecision {
            info: vec![0; code.k()],
            payload: vec![0; code.payload_len()],
            crc_ok: false,
            attempts: 0,
        })
        .collect();
    // Number of cancellations seen at each user's last failed attempt.
    let mut last_try: Vec<Option<usize>> = vec![None; nu];
    let mut cancelled = 0usize;
    for pass in 0..cfg.outer_iterations.max(1) {
        engine.refresh(&active)?;
        let mut tried = vec![false; nu];
        let mut successes = 0;
        loop {
            let next = (0..nu)
                .filter(|&u| active[u] && !tried[u])
                .map(|u| (u, engine.effective_sinr(u)))
                .fold(None, |best: Option<(usize, f64)>, (u, s)| match best {
                    Some((_, bs)) if bs >= s => best,
                    _ => Some((u, s)),
                });
            let Some((u, sinr)) = next else { break };
            tried[u] = true;
            if last_try[u] == Some(cancelled) {
                continue;
            }
            let soft = engine.soft_symbols(u, &residual);
            let llr = qpsk_soft_demap(&soft)?;
            let out = decoder.decode(&llr, &ctx.users[u].frozen)?;
            let d = &mut decisions[u];
            d.attempts += 1;
            d.crc_ok = out.crc_ok;
            d.info = out.info;
            d.payload = out.payload;
            if let Some(t) = trace.as_deref_mut() {
                t.push(format!(
                    "pass={pass} user={u} eff_sinr_db={:.3} crc_ok={}",
                    10.0 * sinr.max(1e-30).log10(),
                    out.crc_ok
                ));
            }
            if out.crc_ok {
                for (res, contrib) in residual.iter_mut().zip(reconstruct(
                    &ctx.users[u],
                    &out.codeword,
                    &ctx.csi[u],
                    ctx.tables,
                )?) {
                    res.sub_assign(&contrib)?;
                }
                active[u] = false;
                engine.cancel(u, &active)?;
                cancelled += 1;
                successes += 1;
            } else {
                last_try[u] = Some(cancelled);
            }
        }
        if successes == 0 || active.iter().all(|&a| !a) {
            break;
        }
    }
    Ok(decisions)
}
