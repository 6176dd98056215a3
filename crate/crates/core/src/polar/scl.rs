//! CRC-aided successive-cancellation list decoding.
//!
//! LLR-domain list decoder with min-sum check updates and the hardware-style
//! path metric (a path pays `|L|` whenever its decision disagrees with the
//! sign of the leaf LLR). For a complete path that metric equals the
//! correlation distance between the codeword and the channel hard decisions,
//! so a list at least `2^K` wide decodes to the ML codeword.
//!
//! Path memory is shared between list members and copied lazily per tree
//! depth, so forking a path costs nothing until one of the copies writes.

use crate::error::{check_len, Error, Result};

use super::{polar_transform, FrozenSignature, PolarCodeConfig};

/// Result of one list decode.
#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    /// Decoded payload (info block without the CRC).
    pub payload: Vec<u8>,
    /// Decoded info block including the CRC bits.
    pub info: Vec<u8>,
    pub crc_ok: bool,
    /// Re-encoded codeword of the chosen path, frozen values included.
    pub codeword: Vec<u8>,
    pub path_metric: f64,
}

#[inline]
fn min_sum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn metric_cost(llr: f64, bit: u8) -> f64 {
    let hard = (llr < 0.0) as u8;
    if hard == bit {
        0.0
    } else {
        llr.abs()
    }
}

/// Reusable list decoder for one code geometry and list size.
#[derive(Debug, Clone)]
pub struct SclDecoder {
    cfg: PolarCodeConfig,
    list_size: usize,
    depth: usize,
    // Per depth 1..=m (index 0 unused): pooled LLR and partial-sum arrays.
    llr: Vec<Vec<f64>>,
    bits: Vec<Vec<u8>>,
    refc: Vec<Vec<u32>>,
    free: Vec<Vec<usize>>,
    path_arr: Vec<Vec<usize>>,
    // frozen_node[d][i]: every leaf under node i at depth d is frozen.
    frozen_node: Vec<Vec<bool>>,
    active: Vec<bool>,
    inactive: Vec<usize>,
    pm: Vec<f64>,
    // Decisions are recorded for information bits only.
    trellis_bit: Vec<u8>,
    trellis_parent: Vec<u32>,
    frozen_value: Vec<u8>,
    beta: Vec<u8>,
}

impl SclDecoder {
    pub fn new(cfg: &PolarCodeConfig, list_size: usize) -> Result<Self> {
        if list_size == 0 || !list_size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "list size must be a power of two, got {list_size}"
            )));
        }
        let n = cfg.n();
        let m = n.trailing_zeros() as usize;
        let l = list_size;
        let mut llr = vec![Vec::new()];
        let mut bits = vec![Vec::new()];
        for lambda in 1..=m {
            let len = n >> lambda;
            llr.push(vec![0.0; l * len]);
            bits.push(vec![0u8; l * 2 * len]);
        }
        let mut frozen_node = vec![Vec::new(); m + 1];
        frozen_node[m] = (0..n).map(|i| cfg.is_frozen(i)).collect();
        for d in (0..m).rev() {
            frozen_node[d] = (0..1usize << d)
                .map(|i| frozen_node[d + 1][2 * i] && frozen_node[d + 1][2 * i + 1])
                .collect();
        }
        Ok(Self {
            cfg: cfg.clone(),
            list_size,
            depth: m,
            llr,
            bits,
            refc: vec![vec![0; l]; m + 1],
            free: vec![Vec::with_capacity(l); m + 1],
            path_arr: vec![vec![0; l]; m + 1],
            frozen_node,
            active: vec![false; l],
            inactive: Vec::with_capacity(l),
            pm: vec![0.0; l],
            trellis_bit: vec![0; cfg.k() * l],
            trellis_parent: vec![0; cfg.k() * l],
            frozen_value: vec![0; n],
            beta: Vec::with_capacity(n),
        })
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn config(&self) -> &PolarCodeConfig {
        &self.cfg
    }

    fn reset(&mut self) {
        let l = self.list_size;
        for lambda in 1..=self.depth {
            self.refc[lambda].iter_mut().for_each(|r| *r = 0);
            self.free[lambda].clear();
            self.free[lambda].extend((0..l).rev());
        }
        self.active.iter_mut().for_each(|a| *a = false);
        self.inactive.clear();
        self.inactive.extend((0..l).rev());
        self.pm.iter_mut().for_each(|p| *p = 0.0);
        // Initial path owns one array at every depth.
        let p = self.inactive.pop().expect("list has capacity");
        self.active[p] = true;
        for lambda in 1..=self.depth {
            let s = self.free[lambda].pop().expect("pool has capacity");
            self.refc[lambda][s] = 1;
            self.path_arr[lambda][p] = s;
        }
    }

    fn clone_path(&mut self, src: usize) -> usize {
        let dst = self.inactive.pop().expect("clone beyond list capacity");
        self.active[dst] = true;
        self.pm[dst] = self.pm[src];
        for lambda in 1..=self.depth {
            let s = self.path_arr[lambda][src];
            self.path_arr[lambda][dst] = s;
            self.refc[lambda][s] += 1;
        }
        dst
    }

    fn kill_path(&mut self, p: usize) {
        self.active[p] = false;
        self.inactive.push(p);
        for lambda in 1..=self.depth {
            let s = self.path_arr[lambda][p];
            self.refc[lambda][s] -= 1;
            if self.refc[lambda][s] == 0 {
                self.free[lambda].push(s);
            }
        }
    }

    /// Entry at `lambda` owned exclusively by path `p`, copying on demand.
    fn writable(&mut self, lambda: usize, p: usize) -> usize {
        let s = self.path_arr[lambda][p];
        if self.refc[lambda][s] == 1 {
            return s;
        }
        let t = self.free[lambda].pop().expect("pool exhausted");
        let len = self.cfg.n() >> lambda;
        self.llr[lambda].copy_within(s * len..(s + 1) * len, t * len);
        self.bits[lambda].copy_within(s * 2 * len..(s + 1) * 2 * len, t * 2 * len);
        self.refc[lambda][s] -= 1;
        self.refc[lambda][t] = 1;
        self.path_arr[lambda][p] = t;
        t
    }

    /// Fills path `p`'s LLRs at depths `start..=end` for the node holding `phi`.
    fn compute_llrs(&mut self, channel: &[f64], phi: usize, p: usize, start: usize, end: usize) {
        for lambda in start..=end {
            let len = self.cfg.n() >> lambda;
            let dst = self.writable(lambda, p);
            let (lower, upper) = self.llr.split_at_mut(lambda);
            let parent: &[f64] = if lambda == 1 {
                channel
            } else {
                let ps = self.path_arr[lambda - 1][p];
                &lower[lambda - 1][ps * 2 * len..(ps + 1) * 2 * len]
            };
            let out = &mut upper[0][dst * len..(dst + 1) * len];
            let (pa, pb) = parent.split_at(len);
            if lambda == start && phi != 0 {
                let left = &self.bits[lambda][dst * 2 * len..dst * 2 * len + len];
                for (((o, &a), &b), &s) in out.iter_mut().zip(pa).zip(pb).zip(left) {
                    *o = if s == 0 { b + a } else { b - a };
                }
            } else {
                for ((o, &a), &b) in out.iter_mut().zip(pa).zip(pb) {
                    *o = min_sum(a, b);
                }
            }
        }
    }

    /// Metric increment of an all-frozen node at depth `d` whose partial
    /// codeword is `beta`. Summing the leaf costs of a frozen subtree under
    /// min-sum updates collapses to this node-level sum.
    fn frozen_node_cost(
        &self,
        channel: &[f64],
        phi: usize,
        p: usize,
        d: usize,
        start: usize,
        beta: &[u8],
    ) -> f64 {
        let len = self.cfg.n() >> d;
        let parent: &[f64] = if d == 1 {
            channel
        } else {
            let ps = self.path_arr[d - 1][p];
            &self.llr[d - 1][ps * 2 * len..(ps + 1) * 2 * len]
        };
        let (pa, pb) = parent.split_at(len);
        let mut cost = 0.0;
        if d == start && phi != 0 {
            let own = self.path_arr[d][p];
            let left = &self.bits[d][own * 2 * len..own * 2 * len + len];
            for (((&a, &b), &s), &v) in pa.iter().zip(pb).zip(left).zip(beta) {
                cost += metric_cost(if s == 0 { b + a } else { b - a }, v);
            }
        } else {
            for ((&a, &b), &v) in pa.iter().zip(pb).zip(beta) {
                cost += metric_cost(min_sum(a, b), v);
            }
        }
        cost
    }

    /// Stores the partial codeword of node `idx` at depth `d` and combines
    /// completed sibling pairs upwards.
    fn complete_node(&mut self, d: usize, idx: usize, p: usize, beta: &[u8]) {
        let len = self.cfg.n() >> d;
        let e = self.writable(d, p);
        let off = e * 2 * len + (idx & 1) * len;
        self.bits[d][off..off + len].copy_from_slice(beta);
        let mut lambda = d;
        let mut idx = idx;
        while idx & 1 == 1 && lambda > 1 {
            let len = self.cfg.n() >> lambda;
            let child = self.path_arr[lambda][p];
            let parent = self.writable(lambda - 1, p);
            let slot = (idx >> 1) & 1;
            let (lower, upper) = self.bits.split_at_mut(lambda);
            let c = &upper[0][child * 2 * len..(child + 1) * 2 * len];
            let (left, right) = c.split_at(len);
            let out_start = parent * 4 * len + slot * 2 * len;
            let out = &mut lower[lambda - 1][out_start..out_start + 2 * len];
            let (oa, ob) = out.split_at_mut(len);
            for (((x, y), &a), &b) in oa.iter_mut().zip(ob.iter_mut()).zip(left).zip(right) {
                *x = a ^ b;
                *y = b;
            }
            idx >>= 1;
            lambda -= 1;
        }
    }

    /// Decodes one block of channel LLRs under the frozen-value hypothesis `sig`.
    pub fn decode(&mut self, llr: &[f64], sig: &FrozenSignature) -> Result<SclOutput> {
        let n = self.cfg.n();
        let l = self.list_size;
        let m = self.depth;
        check_len("LLR block", n, llr.len())?;
        check_len(
            "frozen signature",
            self.cfg.frozen_set().len(),
            sig.values.len(),
        )?;
        if llr.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("LLR block"));
        }
        for (&i, &v) in self.cfg.frozen_set().iter().zip(&sig.values) {
            self.frozen_value[i] = v & 1;
        }
        self.reset();

        let mut cands: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * l);
        let mut paths: Vec<usize> = Vec::with_capacity(l);
        let mut keep = vec![[false; 2]; l];
        let mut metrics = vec![[0.0f64; 2]; l];
        let mut beta = std::mem::take(&mut self.beta);
        let mut phi = 0;
        let mut j = 0;
        while phi < n {
            paths.clear();
            paths.extend((0..l).filter(|&p| self.active[p]));
            let start = if phi == 0 {
                1
            } else {
                m - phi.trailing_zeros() as usize
            };
            let mut d = start;
            while d < m && !self.frozen_node[d][phi >> (m - d)] {
                d += 1;
            }
            if self.frozen_node[d][phi >> (m - d)] {
                // Whole subtree frozen: no forks, one metric update per path.
                let size = n >> d;
                beta.clear();
                beta.extend_from_slice(&self.frozen_value[phi..phi + size]);
                polar_transform(&mut beta);
                for &p in &paths {
                    self.compute_llrs(llr, phi, p, start, d - 1);
                    self.pm[p] += self.frozen_node_cost(llr, phi, p, d, start, &beta);
                    self.complete_node(d, phi >> (m - d), p, &beta);
                }
                phi += size;
                continue;
            }

            for &p in &paths {
                self.compute_llrs(llr, phi, p, start, m);
            }
            let leaf = |dec: &Self, p: usize| dec.llr[m][dec.path_arr[m][p]];
            let row = j * l;
            cands.clear();
            for &p in &paths {
                let lv = leaf(self, p);
                metrics[p] = [
                    self.pm[p] + metric_cost(lv, 0),
                    self.pm[p] + metric_cost(lv, 1),
                ];
                cands.push((metrics[p][0], p, 0));
                cands.push((metrics[p][1], p, 1));
            }
            if cands.len() > l {
                // The order is total, so the surviving set is unique.
                cands.select_nth_unstable_by(l - 1, |a, b| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
                });
                cands.truncate(l);
            }
            for &p in &paths {
                keep[p] = [false; 2];
            }
            for c in &cands {
                keep[c.1][c.2 as usize] = true;
            }
            for &p in &paths {
                if !keep[p][0] && !keep[p][1] {
                    self.kill_path(p);
                }
            }
            for &p in &paths {
                match keep[p] {
                    [true, true] => {
                        let q = self.clone_path(p);
                        self.pm[p] = metrics[p][0];
                        self.pm[q] = metrics[p][1];
                        self.trellis_bit[row + p] = 0;
                        self.trellis_parent[row + p] = p as u32;
                        self.trellis_bit[row + q] = 1;
                        self.trellis_parent[row + q] = p as u32;
                        self.complete_node(m, phi, p, &[0]);
                        self.complete_node(m, phi, q, &[1]);
                    }
                    [true, false] | [false, true] => {
                        let u = keep[p][1] as u8;
                        self.pm[p] = metrics[p][u as usize];
                        self.trellis_bit[row + p] = u;
                        self.trellis_parent[row + p] = p as u32;
                        self.complete_node(m, phi, p, &[u]);
                    }
                    [false, false] => {}
                }
            }
            phi += 1;
            j += 1;
        }
        self.beta = beta;

        // Trace back every survivor and pick the best CRC-passing one.
        let k = self.cfg.k();
        let mut best: Option<(bool, f64, Vec<u8>)> = None;
        for p in 0..l {
            if !self.active[p] {
                continue;
            }
            let mut info = vec![0u8; k];
            let mut cur = p;
            for j in (0..k).rev() {
                info[j] = self.trellis_bit[j * l + cur];
                cur = self.trellis_parent[j * l + cur] as usize;
            }
            let ok = self.cfg.check_crc(&info)?;
            let better = match &best {
                None => true,
                Some((bok, bpm, _)) => (ok && !bok) || (ok == *bok && self.pm[p] < *bpm),
            };
            if better {
                best = Some((ok, self.pm[p], info));
            }
        }
        let (crc_ok, path_metric, info) = best.expect("at least one survivor");
        let mut u = self.frozen_value.clone();
        for (&i, &b) in self.cfg.info_set().iter().zip(&info) {
            u[i] = b;
        }
        polar_transform(&mut u);
        Ok(SclOutput {
            payload: info[..self.cfg.payload_len()].to_vec(),
            info,
            crc_ok,
            codeword: u,
            path_metric,
        })
    }
}

/// One-shot convenience wrapper around [`SclDecoder`].
pub fn scl_decode(
    llr: &[f64],
    cfg: &PolarCodeConfig,
    sig: &FrozenSignature,
    list_size: usize,
) -> Result<SclOutput> {
    SclDecoder::new(cfg, list_size)?.decode(llr, sig)
}
