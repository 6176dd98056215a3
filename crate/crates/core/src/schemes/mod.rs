//! Transmit-side signature processing and placement on the resource grid.
//!
//! Spread schemes carry 256 QPSK symbols (a 512-bit codeword) per user.
//! Symbol `k` lives in subcarrier group `k mod 64` of OFDM symbol `k / 64`,
//! except for RDMA, which repeats every symbol once per OFDM symbol. Direct
//! schemes (PCBMA, OFDM) place 1024 symbols one per resource element.

mod tables;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

pub use tables::{PdmaTable, ScmaCodebook};

use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, NUM_DATA_RES, NUM_DATA_SYMBOLS, NUM_SUBCARRIERS};
use crate::polar::{make_signature, FrozenSignature, PolarCodeConfig, SignatureMode};
use crate::qpsk::qpsk_map;
use crate::rng::{Purpose, StreamKey};

pub const GROUP_SIZE: usize = 4;
pub const GROUPS_PER_SYMBOL: usize = NUM_SUBCARRIERS / GROUP_SIZE;
pub const SPREAD_SYMBOLS: usize = GROUPS_PER_SYMBOL * NUM_DATA_SYMBOLS;
pub const RDMA_REPETITIONS: usize = NUM_DATA_SYMBOLS;

/// Multiple access scheme. `OfdmMatched` is the single-user reference for
/// the spread family: the 512-bit code repeated over a 4-subcarrier group
/// with flat weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Scma,
    Pdma,
    Rdma,
    Musa,
    Pcbma,
    Ofdm,
    OfdmMatched,
}

/// Detector paired with a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    MmseSic,
    MfSic,
    Mpa,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Scma,
        Scheme::Pdma,
        Scheme::Rdma,
        Scheme::Musa,
        Scheme::Pcbma,
        Scheme::Ofdm,
        Scheme::OfdmMatched,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Scma => "scma",
            Scheme::Pdma => "pdma",
            Scheme::Rdma => "rdma",
            Scheme::Musa => "musa",
            Scheme::Pcbma => "pcbma",
            Scheme::Ofdm => "ofdm",
            Scheme::OfdmMatched => "ofdm-matched",
        }
    }

    /// True for schemes carrying a 512-bit codeword over 4 resources per symbol.
    pub fn is_spread(self) -> bool {
        !matches!(self, Scheme::Pcbma | Scheme::Ofdm)
    }

    pub fn block_length(self) -> usize {
        if self.is_spread() {
            2 * SPREAD_SYMBOLS
        } else {
            2 * NUM_DATA_RES
        }
    }

    pub fn detector(self) -> Detector {
        match self {
            Scheme::Scma => Detector::Mpa,
            Scheme::Rdma => Detector::MfSic,
            _ => Detector::MmseSic,
        }
    }

    /// Amplitude applied to the mapped grid so every user radiates the same
    /// frame energy (1024) whatever its scheme.
    pub fn tx_amplitude(self) -> f64 {
        if self.is_spread() {
            2.0
        } else {
            1.0
        }
    }

    /// Largest supported user count, if bounded by the signature material.
    pub fn max_users(self) -> Option<usize> {
        match self {
            Scheme::Scma => Some(6),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == lower)
            .ok_or_else(|| {
                let valid: Vec<&str> = Scheme::ALL.iter().map(|x| x.name()).collect();
                Error::Config(format!(
                    "unknown scheme '{s}', valid schemes: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// One PDMA column plus the phase applied when patterns are reused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdmaPattern {
    pub column: [u8; GROUP_SIZE],
    pub phase: Complex64,
}

impl PdmaPattern {
    pub fn new(column: [u8; GROUP_SIZE]) -> Self {
        Self {
            column,
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn weight(&self) -> usize {
        self.column.iter().map(|&c| c as usize).sum()
    }

    /// Per-resource complex weights, unit total energy.
    pub fn weights(&self) -> Result<[Complex64; GROUP_SIZE]> {
        let w = self.weight();
        if w == 0 {
            return Err(Error::InvalidArgument("PDMA pattern is all zero".into()));
        }
        let a = self.phase / (w as f64).sqrt();
        Ok(self
            .column
            .map(|c| if c == 1 { a } else { Complex64::new(0.0, 0.0) }))
    }
}

/// Scheme-specific signature material of one user.
#[derive(Debug, Clone, PartialEq)]
pub enum SignatureMaterial {
    /// Unit-norm spreading sequence (MUSA and the matched reference).
    Sequence([Complex64; GROUP_SIZE]),
    Pattern(PdmaPattern),
    /// RDMA cyclic shift per repetition.
    Shift(usize),
    /// Index into the SCMA codebook set.
    Codebook(usize),
    /// No signature beyond the frozen bits (PCBMA, OFDM).
    Direct,
}

impl SignatureMaterial {
    /// Weights over the 4 resources of a group, for group-mapped schemes.
    pub fn group_weights(&self) -> Option<[Complex64; GROUP_SIZE]> {
        match self {
            SignatureMaterial::Sequence(s) => Some(*s),
            SignatureMaterial::Pattern(p) => p.weights().ok(),
            _ => None,
        }
    }
}

/// Everything the transmitter of one user needs besides its payload.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTxConfig {
    pub user_id: usize,
    pub scheme: Scheme,
    pub material: SignatureMaterial,
    pub frozen: FrozenSignature,
    pub power_offset_db: f64,
}

impl UserTxConfig {
    /// Linear amplitude of the power offset.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.power_offset_db / 20.0)
    }
}

fn check_symbols(what: &'static str, expected: usize, got: usize) -> Result<()> {
    crate::error::check_len(what, expected, got)
}

/// Spreads symbol `k` over the 4 subcarriers of group `k mod 64` in OFDM
/// symbol `k / 64`.
pub fn group_map(symbols: &[Complex64], weights: &[Complex64; GROUP_SIZE]) -> Result<ResourceGrid> {
    check_symbols("spread symbols", SPREAD_SYMBOLS, symbols.len())?;
    let mut grid = ResourceGrid::data_grid();
    for (k, &s) in symbols.iter().enumerate() {
        let (g, t) = (k % GROUPS_PER_SYMBOL, k / GROUPS_PER_SYMBOL);
        for (i, &w) in weights.iter().enumerate() {
            grid.set(g * GROUP_SIZE + i, t, s * w);
        }
    }
    Ok(grid)
}

/// Least-squares inverse of [`group_map`].
pub fn group_unmap(
    grid: &ResourceGrid,
    weights: &[Complex64; GROUP_SIZE],
) -> Result<Vec<Complex64>> {
    check_symbols("grid symbols", NUM_DATA_SYMBOLS, grid.num_symbols())?;
    let norm: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("all-zero group weights".into()));
    }
    Ok((0..SPREAD_SYMBOLS)
        .map(|k| {
            let (g, t) = (k % GROUPS_PER_SYMBOL, k / GROUPS_PER_SYMBOL);
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w.conj() * grid.get(g * GROUP_SIZE + i, t))
                .sum::<Complex64>()
                / norm
        })
        .collect())
}

pub fn musa_map(symbols: &[Complex64], seq: &[Complex64; GROUP_SIZE]) -> Result<ResourceGrid> {
    group_map(symbols, seq)
}

pub fn pdma_map(symbols: &[Complex64], pattern: &PdmaPattern) -> Result<ResourceGrid> {
    group_map(symbols, &pattern.weights()?)
}

/// Subcarrier of repetition `r` of symbol `k` under cyclic shift `shift`.
#[inline]
pub fn rdma_subcarrier(k: usize, r: usize, shift: usize) -> usize {
    (k + r * shift) % NUM_SUBCARRIERS
}

/// Repeats every symbol on each OFDM symbol `r`, at subcarrier
/// `(k + r*shift) mod 256`, with amplitude 1/2 per copy.
pub fn rdma_map(symbols: &[Complex64], shift: usize) -> Result<ResourceGrid> {
    check_symbols("spread symbols", SPREAD_SYMBOLS, symbols.len())?;
    if shift >= NUM_SUBCARRIERS {
        return Err(Error::InvalidArgument(format!(
            "RDMA shift {shift} out of range 0..256"
        )));
    }
    let mut grid = ResourceGrid::data_grid();
    for (k, &s) in symbols.iter().enumerate() {
        for r in 0..RDMA_REPETITIONS {
            grid.set(rdma_subcarrier(k, r, shift), r, s * 0.5);
        }
    }
    Ok(grid)
}

/// Combines the 4 repetitions back into symbols.
pub fn rdma_unmap(grid: &ResourceGrid, shift: usize) -> Result<Vec<Complex64>> {
    check_symbols("grid symbols", NUM_DATA_SYMBOLS, grid.num_symbols())?;
    Ok((0..SPREAD_SYMBOLS)
        .map(|k| {
            (0..RDMA_REPETITIONS)
                .map(|r| grid.get(rdma_subcarrier(k, r, shift), r))
                .sum::<Complex64>()
                * 0.5
        })
        .collect())
}

/// Maps each bit group of `log2 J` bits (MSB first) to one sparse codeword.
pub fn scma_encode(coded_bits: &[u8], book: &[[Complex64; GROUP_SIZE]]) -> Result<ResourceGrid> {
    let j = book.len();
    if !j.is_power_of_two() || j < 2 {
        return Err(Error::InvalidArgument(
            "codebook size must be a power of two".into(),
        ));
    }
    let b = j.trailing_zeros() as usize;
    if coded_bits.len() % b != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} coded bits not divisible by {b}",
            coded_bits.len()
        )));
    }
    check_symbols("SCMA codewords", SPREAD_SYMBOLS, coded_bits.len() / b)?;
    let mut grid = ResourceGrid::data_grid();
    for (k, chunk) in coded_bits.chunks_exact(b).enumerate() {
        let idx = chunk
            .iter()
            .fold(0usize, |acc, &x| (acc << 1) | (x & 1) as usize);
        let (g, t) = (k % GROUPS_PER_SYMBOL, k / GROUPS_PER_SYMBOL);
        for (i, &v) in book[idx].iter().enumerate() {
            grid.set(g * GROUP_SIZE + i, t, v);
        }
    }
    Ok(grid)
}

/// Nearest-codeword inverse of [`scma_encode`].
pub fn scma_decode_hard(grid: &ResourceGrid, book: &[[Complex64; GROUP_SIZE]]) -> Result<Vec<u8>> {
    check_symbols("grid symbols", NUM_DATA_SYMBOLS, grid.num_symbols())?;
    let b = book.len().trailing_zeros() as usize;
    let mut bits = Vec::with_capacity(SPREAD_SYMBOLS * b);
    for k in 0..SPREAD_SYMBOLS {
        let (g, t) = (k % GROUPS_PER_SYMBOL, k / GROUPS_PER_SYMBOL);
        let dist = |cw: &[Complex64; GROUP_SIZE]| -> f64 {
            cw.iter()
                .enumerate()
                .map(|(i, v)| (grid.get(g * GROUP_SIZE + i, t) - v).norm_sqr())
                .sum()
        };
        let best = (0..book.len())
            .min_by(|&x, &y| dist(&book[x]).total_cmp(&dist(&book[y])))
            .expect("nonempty codebook");
        for s in (0..b).rev() {
            bits.push(((best >> s) & 1) as u8);
        }
    }
    Ok(bits)
}

/// Fills the grid subcarrier-first, then symbol.
pub fn direct_map(symbols: &[Complex64]) -> Result<ResourceGrid> {
    check_symbols("direct symbols", NUM_DATA_RES, symbols.len())?;
    ResourceGrid::from_vec(NUM_DATA_SYMBOLS, symbols.to_vec())
}

pub fn direct_unmap(grid: &ResourceGrid) -> Result<Vec<Complex64>> {
    check_symbols("grid symbols", NUM_DATA_SYMBOLS, grid.num_symbols())?;
    Ok(grid.as_slice().to_vec())
}

/// Element-wise sum of grids, each scaled by `10^(offset/20)`.
pub fn superpose(grids: &[ResourceGrid], power_offsets_db: &[f64]) -> Result<ResourceGrid> {
    crate::error::check_len("power offsets", grids.len(), power_offsets_db.len())?;
    let first = grids
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to superpose".into()))?;
    let mut out = ResourceGrid::zeros(first.num_symbols());
    for (g, &db) in grids.iter().zip(power_offsets_db) {
        out.add_scaled(g, Complex64::new(10f64.powf(db / 20.0), 0.0))?;
    }
    Ok(out)
}

/// Users per orthogonal resource, in percent. Every scheme is measured
/// against 4 orthogonal users per 1024-RE frame at the same SE.
pub fn overload_factor(num_users: usize, _scheme: Scheme) -> f64 {
    num_users as f64 / GROUP_SIZE as f64 * 100.0
}

/// Inverse of [`overload_factor`]; the percentage must map to whole users.
pub fn users_for_overload(overload_pct: u32) -> Result<usize> {
    let scaled = overload_pct as usize * GROUP_SIZE;
    if overload_pct == 0 || scaled % 100 != 0 {
        return Err(Error::Config(format!(
            "overload {overload_pct}% does not correspond to a whole number of users (multiples of 25%)"
        )));
    }
    Ok(scaled / 100)
}

/// Seeded MUSA sequences with elements from `{±1±j}/(2√2)` (unit norm),
/// pairwise distinct.
pub fn musa_sequences(num_users: usize, seed: u64) -> Vec<[Complex64; GROUP_SIZE]> {
    let mut out: Vec<[Complex64; GROUP_SIZE]> = Vec::with_capacity(num_users);
    for u in 0..num_users {
        let mut rng = StreamKey::new(seed, Purpose::SpreadingSequence)
            .user(u as u64)
            .rng();
        loop {
            let seq = [(); GROUP_SIZE].map(|_| {
                let a = 0.5 * crate::qpsk::INV_SQRT2;
                let re = if rng.gen::<bool>() { a } else { -a };
                let im = if rng.gen::<bool>() { a } else { -a };
                Complex64::new(re, im)
            });
            // 256 distinct sequences exist; beyond that duplicates are unavoidable.
            if out.len() >= 256 || !out.contains(&seq) {
                out.push(seq);
                break;
            }
        }
    }
    out
}

/// Pattern assignment: the 150% table up to 6 users, the 300% table up to 12,
/// then the 300% columns again with an extra `pi/4` phase per reuse round.
pub fn pdma_patterns(num_users: usize, small: &PdmaTable, large: &PdmaTable) -> Vec<PdmaPattern> {
    let table = if num_users <= small.columns.len() {
        small
    } else {
        large
    };
    let p = table.columns.len();
    (0..num_users)
        .map(|u| PdmaPattern {
            column: table.columns[u % p],
            phase: Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * (u / p) as f64),
        })
        .collect()
}

/// User `u` gets shift `u * floor(256 / U)`.
pub fn rdma_shifts(num_users: usize) -> Vec<usize> {
    let step = NUM_SUBCARRIERS / num_users.max(1);
    (0..num_users)
        .map(|u| (u * step) % NUM_SUBCARRIERS)
        .collect()
}

/// Signature tables used when building users.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureTables {
    pub scma: ScmaCodebook,
    pub pdma_small: PdmaTable,
    pub pdma_large: PdmaTable,
}

impl Default for SignatureTables {
    fn default() -> Self {
        Self {
            scma: ScmaCodebook::default(),
            pdma_small: PdmaTable::default_150(),
            pdma_large: PdmaTable::default_300(),
        }
    }
}

/// Builds `num_users` transmit configurations with zero power offset.
pub fn build_users(
    scheme: Scheme,
    num_users: usize,
    seed: u64,
    code: &PolarCodeConfig,
    tables: &SignatureTables,
) -> Result<Vec<UserTxConfig>> {
    if num_users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    if code.n() != scheme.block_length() {
        return Err(Error::InvalidCode(format!(
            "{scheme} needs N={}, got {}",
            scheme.block_length(),
            code.n()
        )));
    }
    let materials: Vec<SignatureMaterial> = match scheme {
        Scheme::Musa => musa_sequences(num_users, seed)
            .into_iter()
            .map(SignatureMaterial::Sequence)
            .collect(),
        Scheme::OfdmMatched => {
            vec![SignatureMaterial::Sequence([Complex64::new(0.5, 0.0); GROUP_SIZE]); num_users]
        }
        Scheme::Pdma => pdma_patterns(num_users, &tables.pdma_small, &tables.pdma_large)
            .into_iter()
            .map(SignatureMaterial::Pattern)
            .collect(),
        Scheme::Rdma => rdma_shifts(num_users)
            .into_iter()
            .map(SignatureMaterial::Shift)
            .collect(),
        Scheme::Scma => {
            if num_users > tables.scma.num_users() {
                return Err(Error::Config(format!(
                    "SCMA codebook supports {} users, requested {num_users}",
                    tables.scma.num_users()
                )));
            }
            (0..num_users).map(SignatureMaterial::Codebook).collect()
        }
        Scheme::Pcbma | Scheme::Ofdm => vec![SignatureMaterial::Direct; num_users],
    };
    let mode = if scheme == Scheme::Pcbma {
        SignatureMode::Random
    } else {
        SignatureMode::Conventional
    };
    Ok(materials
        .into_iter()
        .enumerate()
        .map(|(u, material)| UserTxConfig {
            user_id: u,
            scheme,
            material,
            frozen: make_signature(u, seed, code, mode),
            power_offset_db: 0.0,
        })
        .collect())
}

/// Maps a user's codeword onto its grid with the scheme's transmit
/// amplitude applied (power offset excluded).
pub fn modulate_user(
    user: &UserTxConfig,
    codeword: &[u8],
    tables: &SignatureTables,
) -> Result<ResourceGrid> {
    crate::error::check_len("codeword", user.scheme.block_length(), codeword.len())?;
    let mut grid = match &user.material {
        SignatureMaterial::Codebook(i) => scma_encode(codeword, tables.scma.user(*i))?,
        m => {
            let symbols = qpsk_map(codeword)?;
            match m {
                SignatureMaterial::Sequence(s) => musa_map(&symbols, s)?,
                SignatureMaterial::Pattern(p) => pdma_map(&symbols, p)?,
                SignatureMaterial::Shift(s) => rdma_map(&symbols, *s)?,
                SignatureMaterial::Direct => direct_map(&symbols)?,
                SignatureMaterial::Codebook(_) => unreachable!(),
            }
        }
    };
    grid.scale(user.scheme.tx_amplitude());
    Ok(grid)
}
