//! Channel realizations and their application to transmitted grids.
//!
//! Fading is block static over a frame: each trial draws independent
//! Rayleigh taps per (user, receive antenna). Without CFO the channel is
//! applied per subcarrier using the exact continuous tap delays, which is
//! exact as long as the delay spread fits in the cyclic prefix. With CFO the
//! time-domain path is used instead (delays rounded to whole samples).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::grid::{ResourceGrid, NUM_SUBCARRIERS};
use crate::linalg::{cholesky_in_place, cholesky_solve};
use crate::ofdm::{OfdmModem, OfdmNumerology};
use crate::qpsk::qpsk_symbol;
use crate::rng::{Purpose, StreamKey};

const TDLA_DEFAULT: &str = include_str!("../data/tdla.txt");
const BU_DEFAULT: &str = include_str!("../data/bu.txt");

/// Default TDL-A RMS delay spread.
pub const TDLA_RMS_DELAY: f64 = 30e-9;

/// Tap delays (seconds, ascending) and linear mean powers summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub name: String,
    pub delays: Vec<f64>,
    pub powers: Vec<f64>,
}

impl PowerDelayProfile {
    /// Parses `delay_ns power_dB` rows. An optional `name <id>` line sets the
    /// name; `#` starts a comment. Powers are normalized to unit total.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            msg,
        };
        let mut name = source_name.to_string();
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts[0] == "name" {
                name = parts
                    .get(1)
                    .ok_or_else(|| err(i + 1, "missing profile name".into()))?
                    .to_string();
                continue;
            }
            if parts.len() != 2 {
                return Err(err(i + 1, "expected 'delay_ns power_dB'".into()));
            }
            let d: f64 = parts[0]
                .parse()
                .map_err(|_| err(i + 1, format!("bad delay '{}'", parts[0])))?;
            let p: f64 = parts[1]
                .parse()
                .map_err(|_| err(i + 1, format!("bad power '{}'", parts[1])))?;
            if !(d >= 0.0) || !d.is_finite() || !p.is_finite() {
                return Err(err(i + 1, "delays must be finite and non-negative".into()));
            }
            rows.push((d * 1e-9, p));
        }
        if rows.is_empty() {
            return Err(err(0, "profile has no taps".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = rows.iter().map(|r| 10f64.powf(r.1 / 10.0)).sum();
        Ok(Self {
            name,
            delays: rows.iter().map(|r| r.0).collect(),
            powers: rows
                .iter()
                .map(|r| 10f64.powf(r.1 / 10.0) / total)
                .collect(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn tdla() -> Self {
        Self::parse(TDLA_DEFAULT, "tdla.txt").expect("bundled profile parses")
    }

    pub fn bu() -> Self {
        Self::parse(BU_DEFAULT, "bu.txt").expect("bundled profile parses")
    }

    /// Single unit tap at zero delay.
    pub fn flat() -> Self {
        Self {
            name: "flat".into(),
            delays: vec![0.0],
            powers: vec![1.0],
        }
    }

    pub fn rms_delay_spread(&self) -> f64 {
        rms_delay_spread(&self.delays, &self.powers)
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.last().copied().unwrap_or(0.0)
    }

    /// Copy with delays scaled so the RMS delay spread equals `target`.
    pub fn scaled_to_rms(&self, target: f64) -> Result<Self> {
        if !(target > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "RMS delay target must be positive, got {target}"
            )));
        }
        let cur = self.rms_delay_spread();
        if cur == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot rescale a single-delay profile".into(),
            ));
        }
        let k = target / cur;
        Ok(Self {
            name: self.name.clone(),
            delays: self.delays.iter().map(|d| d * k).collect(),
            powers: self.powers.clone(),
        })
    }

    /// Frequency correlation `E[H(f+df) H*(f)]` for unit total power.
    pub fn frequency_correlation(&self, df: f64) -> Complex64 {
        self.delays
            .iter()
            .zip(&self.powers)
            .map(|(&d, &p)| Complex64::from_polar(p, -2.0 * std::f64::consts::PI * df * d))
            .sum()
    }
}

/// RMS spread of a discrete power delay profile (powers need not be normalized).
pub fn rms_delay_spread(delays: &[f64], powers: &[f64]) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean: f64 = delays.iter().zip(powers).map(|(d, p)| d * p).sum::<f64>() / total;
    let second: f64 = delays
        .iter()
        .zip(powers)
        .map(|(d, p)| d * d * p)
        .sum::<f64>()
        / total;
    (second - mean * mean).max(0.0).sqrt()
}

/// Channel scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    AwgnCfo,
    Tdla,
    Bu,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::Awgn,
        ChannelKind::AwgnCfo,
        ChannelKind::Tdla,
        ChannelKind::Bu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::AwgnCfo => "awgn_cfo",
            ChannelKind::Tdla => "tdla",
            ChannelKind::Bu => "bu",
        }
    }

    pub fn is_fading(self) -> bool {
        matches!(self, ChannelKind::Tdla | ChannelKind::Bu)
    }

    pub fn has_cfo(self) -> bool {
        self == ChannelKind::AwgnCfo
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|c| c.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown channel '{s}', valid: awgn, awgn_cfo, tdla, bu"
                ))
            })
    }
}

/// How per-user received powers are drawn each trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerMode {
    /// Offsets uniform on `[-w/2, w/2]` dB around the mean SNR.
    Interval {
        width_db: f64,
    },
    /// Per-user SNR uniform on `[lo, hi]` dB; the noise variance is fixed at 1.
    WideRange {
        lo_db: f64,
        hi_db: f64,
    },
    Equal,
}

impl PowerMode {
    pub fn interval_2db() -> Self {
        PowerMode::Interval { width_db: 2.0 }
    }

    pub fn wide_range() -> Self {
        PowerMode::WideRange {
            lo_db: -7.0,
            hi_db: 17.0,
        }
    }
}

pub fn draw_user_powers(num_users: usize, mode: PowerMode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if num_users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    Ok(match mode {
        PowerMode::Interval { width_db } => {
            if !(width_db >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "negative interval width {width_db}"
                )));
            }
            (0..num_users)
                .map(|_| {
                    if width_db == 0.0 {
                        0.0
                    } else {
                        rng.gen_range(-width_db / 2.0..=width_db / 2.0)
                    }
                })
                .collect()
        }
        PowerMode::WideRange { lo_db, hi_db } => {
            if !(hi_db >= lo_db) {
                return Err(Error::InvalidArgument("empty SNR range".into()));
            }
            (0..num_users)
                .map(|_| rng.gen_range(lo_db..=hi_db))
                .collect()
        }
        PowerMode::Equal => vec![0.0; num_users],
    })
}

/// Uniform CFO on `±ppm * carrier` Hz.
pub fn draw_cfo(rng: &mut impl Rng, carrier_hz: f64, ppm: f64) -> f64 {
    let bound = ppm * 1e-6 * carrier_hz;
    if bound == 0.0 {
        return 0.0;
    }
    rng.gen_range(-bound..=bound)
}

/// `x[n] e^{j 2π cfo n / fs}`.
pub fn apply_cfo(signal: &[Complex64], cfo_hz: f64, sample_rate: f64) -> Vec<Complex64> {
    if cfo_hz == 0.0 {
        return signal.to_vec();
    }
    let w = 2.0 * std::f64::consts::PI * cfo_hz / sample_rate;
    signal
        .iter()
        .enumerate()
        .map(|(n, &x)| x * Complex64::from_polar(1.0, w * n as f64))
        .collect()
}

/// One multipath realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    pub delays: Vec<f64>,
    pub gains: Vec<Complex64>,
}

impl TapSet {
    /// Unit gain at zero delay.
    pub fn identity() -> Self {
        Self {
            delays: vec![0.0],
            gains: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Response on the 256 used subcarriers.
    pub fn frequency_response(&self, num: &OfdmNumerology) -> Vec<Complex64> {
        (0..NUM_SUBCARRIERS)
            .map(|sc| {
                let f = num.frequency(sc);
                self.delays
                    .iter()
                    .zip(&self.gains)
                    .map(|(&d, &g)| {
                        g * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * d)
                    })
                    .sum()
            })
            .collect()
    }

    /// Convolution with delays rounded to whole samples; output has the input length.
    pub fn convolve(&self, x: &[Complex64], sample_rate: f64) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for (&d, &g) in self.delays.iter().zip(&self.gains) {
            let k = (d * sample_rate).round() as usize;
            for n in k..x.len() {
                y[n] += g * x[n - k];
            }
        }
        y
    }
}

#[inline]
pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Rayleigh taps with per-tap variance equal to the profile power. With
/// `rms_target` the delays are first rescaled to that RMS spread.
pub fn generate_taps(
    profile: &PowerDelayProfile,
    rms_target: Option<f64>,
    rng: &mut impl Rng,
) -> Result<TapSet> {
    let delays = match rms_target {
        Some(t) => profile.scaled_to_rms(t)?.delays,
        None => profile.delays.clone(),
    };
    Ok(TapSet {
        delays,
        gains: profile
            .powers
            .iter()
            .map(|&p| complex_gaussian(rng, p))
            .collect(),
    })
}

/// Per-user impairments drawn for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserImpairments {
    pub power_offset_db: f64,
    pub cfo_hz: f64,
}

/// Channel state of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `taps[user][antenna]`.
    pub taps: Vec<Vec<TapSet>>,
    /// `responses[user][antenna][subcarrier]`, power offset excluded.
    pub responses: Vec<Vec<Vec<Complex64>>>,
    pub impairments: Vec<UserImpairments>,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.taps.len()
    }

    pub fn num_rx(&self) -> usize {
        self.taps.first().map_or(0, |t| t.len())
    }
}

/// Static description of the channel for a run.
#[derive(Debug, Clone)]
pub struct ChannelSetup {
    pub kind: ChannelKind,
    /// Profile with final delays (already rescaled for TDL-A).
    pub profile: PowerDelayProfile,
    pub num_rx: usize,
    pub power_mode: PowerMode,
    pub cfo_ppm: f64,
    pub num: OfdmNumerology,
}

impl ChannelSetup {
    pub fn new(kind: ChannelKind, num_rx: usize, power_mode: PowerMode) -> Result<Self> {
        let profile = match kind {
            ChannelKind::Awgn | ChannelKind::AwgnCfo => PowerDelayProfile::flat(),
            ChannelKind::Tdla => PowerDelayProfile::tdla().scaled_to_rms(TDLA_RMS_DELAY)?,
            ChannelKind::Bu => PowerDelayProfile::bu(),
        };
        Self::with_profile(kind, profile, num_rx, power_mode)
    }

    pub fn with_profile(
        kind: ChannelKind,
        profile: PowerDelayProfile,
        num_rx: usize,
        power_mode: PowerMode,
    ) -> Result<Self> {
        if num_rx == 0 {
            return Err(Error::InvalidArgument(
                "need at least one receive antenna".into(),
            ));
        }
        let num = OfdmNumerology::default();
        if profile.max_delay() > num.cp_duration() {
            return Err(Error::InvalidArgument(format!(
                "profile '{}' exceeds the cyclic prefix ({} s > {} s)",
                profile.name,
                profile.max_delay(),
                num.cp_duration()
            )));
        }
        Ok(Self {
            kind,
            profile,
            num_rx,
            power_mode,
            cfo_ppm: if kind.has_cfo() { 0.1 } else { 0.0 },
            num,
        })
    }

    /// Draws the realization of `trial` for `num_users` users.
    pub fn draw(&self, num_users: usize, seed: u64, trial: u64) -> Result<ChannelRealization> {
        let mut prng = StreamKey::new(seed, Purpose::Power).trial(trial).rng();
        let offsets = draw_user_powers(num_users, self.power_mode, &mut prng)?;
        let mut taps = Vec::with_capacity(num_users);
        let mut responses = Vec::with_capacity(num_users);
        let mut impairments = Vec::with_capacity(num_users);
        for (u, &off) in offsets.iter().enumerate() {
            let mut per_ant = Vec::with_capacity(self.num_rx);
            for a in 0..self.num_rx {
                let t = if self.kind.is_fading() {
                    let mut rng = StreamKey::new(seed, Purpose::Channel)
                        .trial(trial)
                        .user(u as u64)
                        .antenna(a as u64)
                        .rng();
                    generate_taps(&self.profile, None, &mut rng)?
                } else {
                    TapSet::identity()
                };
                per_ant.push(t);
            }
            responses.push(
                per_ant
                    .iter()
                    .map(|t| t.frequency_response(&self.num))
                    .collect(),
            );
            taps.push(per_ant);
            let cfo_hz = if self.kind.has_cfo() {
                let mut rng = StreamKey::new(seed, Purpose::Cfo)
                    .trial(trial)
                    .user(u as u64)
                    .rng();
                draw_cfo(&mut rng, self.num.carrier_frequency, self.cfo_ppm)
            } else {
                0.0
            };
            impairments.push(UserImpairments {
                power_offset_db: off,
                cfo_hz,
            });
        }
        Ok(ChannelRealization {
            taps,
            responses,
            impairments,
        })
    }
}

/// Adds circular Gaussian noise of variance `sigma2` per element.
pub fn add_noise(grid: &mut ResourceGrid, sigma2: f64, rng: &mut ChaCha8Rng) {
    if sigma2 == 0.0 {
        return;
    }
    for x in grid.as_mut_slice() {
        *x += complex_gaussian(rng, sigma2);
    }
}

fn noise_rng(seed: u64, trial: u64, antenna: usize) -> ChaCha8Rng {
    StreamKey::new(seed, Purpose::Noise)
        .trial(trial)
        .antenna(antenna as u64)
        .rng()
}

fn check_users(tx: &[ResourceGrid], real: &ChannelRealization) -> Result<usize> {
    check_len("user grids", real.num_users(), tx.len())?;
    let ns = tx.first().map_or(0, |g| g.num_symbols());
    for g in tx {
        check_len("grid symbols", ns, g.num_symbols())?;
    }
    Ok(ns)
}

/// Frequency-domain application: `Y_a = Σ_u a_u H_{u,a} ⊙ X_u + W_a`.
pub fn apply_channel_freq(
    tx: &[ResourceGrid],
    real: &ChannelRealization,
    sigma2: f64,
    seed: u64,
    trial: u64,
) -> Result<Vec<ResourceGrid>> {
    let ns = check_users(tx, real)?;
    let mut out = Vec::with_capacity(real.num_rx());
    for a in 0..real.num_rx() {
        let mut y = ResourceGrid::zeros(ns);
        for (u, x) in tx.iter().enumerate() {
            let amp = 10f64.powf(real.impairments[u].power_offset_db / 20.0);
            let h = &real.responses[u][a];
            for t in 0..ns {
                for ((o, &xv), &hv) in y.symbol_mut(t).iter_mut().zip(x.symbol(t)).zip(h) {
                    *o += hv * xv * amp;
                }
            }
        }
        add_noise(&mut y, sigma2, &mut noise_rng(seed, trial, a));
        out.push(y);
    }
    Ok(out)
}

/// Time-domain application: OFDM modulation, CFO rotation, tap convolution
/// (delays rounded to samples), demodulation, then noise per element.
pub fn apply_channel_time(
    tx: &[ResourceGrid],
    real: &ChannelRealization,
    modem: &OfdmModem,
    sigma2: f64,
    seed: u64,
    trial: u64,
) -> Result<Vec<ResourceGrid>> {
    let ns = check_users(tx, real)?;
    let fs = modem.numerology().sample_rate();
    let len = modem.signal_len(ns);
    let rotated: Vec<Vec<Complex64>> = tx
        .iter()
        .zip(&real.impairments)
        .map(|(x, imp)| {
            let mut s = modem.grid_to_time(x);
            let amp = 10f64.powf(imp.power_offset_db / 20.0);
            s.iter_mut().for_each(|v| *v *= amp);
            apply_cfo(&s, imp.cfo_hz, fs)
        })
        .collect();
    let mut out = Vec::with_capacity(real.num_rx());
    for a in 0..real.num_rx() {
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for (u, s) in rotated.iter().enumerate() {
            for (o, v) in acc.iter_mut().zip(real.taps[u][a].convolve(s, fs)) {
                *o += v;
            }
        }
        let mut y = modem.time_to_grid(&acc, ns)?;
        add_noise(&mut y, sigma2, &mut noise_rng(seed, trial, a));
        out.push(y);
    }
    Ok(out)
}

/// Exact responses scaled by each user's power offset: `[user][antenna][sc]`.
pub fn genie_csi(real: &ChannelRealization) -> Vec<Vec<Vec<Complex64>>> {
    real.responses
        .iter()
        .zip(&real.impairments)
        .map(|(per_ant, imp)| {
            let amp = 10f64.powf(imp.power_offset_db / 20.0);
            per_ant
                .iter()
                .map(|h| h.iter().map(|v| v * amp).collect())
                .collect()
        })
        .collect()
}

/// Interleaved comb pilots on one OFDM symbol: user `u` owns subcarriers
/// `s` with `s mod U == u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    pub num_users: usize,
    /// QPSK pilot values per user, aligned with [`PilotLayout::bins`].
    pub values: Vec<Vec<Complex64>>,
}

/// Fewest pilots per user the comb must provide.
pub const MIN_PILOTS_PER_USER: usize = 8;

impl PilotLayout {
    pub fn new(num_users: usize, seed: u64) -> Result<Self> {
        if num_users == 0 || NUM_SUBCARRIERS / num_users < MIN_PILOTS_PER_USER {
            return Err(Error::InvalidArgument(format!(
                "{num_users} users exceed the pilot comb capacity ({} users with at least {MIN_PILOTS_PER_USER} pilots each)",
                NUM_SUBCARRIERS / MIN_PILOTS_PER_USER
            )));
        }
        let values = (0..num_users)
            .map(|u| {
                let mut rng = StreamKey::new(seed, Purpose::Pilot).user(u as u64).rng();
                (0..Self::count_for(num_users, u))
                    .map(|_| qpsk_symbol(rng.gen::<bool>() as u8, rng.gen::<bool>() as u8))
                    .collect()
            })
            .collect();
        Ok(Self { num_users, values })
    }

    fn count_for(num_users: usize, u: usize) -> usize {
        (u..NUM_SUBCARRIERS).step_by(num_users).count()
    }

    pub fn bins(&self, u: usize) -> Vec<usize> {
        (u..NUM_SUBCARRIERS).step_by(self.num_users).collect()
    }

    /// Single-symbol pilot grid of user `u`.
    pub fn pilot_grid(&self, u: usize) -> ResourceGrid {
        let mut g = ResourceGrid::zeros(1);
        for (&s, &v) in self.bins(u).iter().zip(&self.values[u]) {
            g.set(s, 0, v);
        }
        g
    }
}

/// Channel estimates handed to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// `[user][antenna][subcarrier]`, power offsets included.
    pub responses: Vec<Vec<Vec<Complex64>>>,
    /// Mean squared error per user, averaged over subcarriers.
    pub error_variance: Vec<f64>,
}

/// LMMSE interpolator from each user's pilot comb to all subcarriers, using
/// the profile's frequency correlation with unit prior power.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    layout: PilotLayout,
    // filters[u]: 256 x P_u row-major.
    filters: Vec<Vec<Complex64>>,
    error_variance: Vec<f64>,
}

impl MmseEstimator {
    pub fn new(
        profile: &PowerDelayProfile,
        layout: PilotLayout,
        sigma2: f64,
        num: &OfdmNumerology,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(
                "estimator needs positive noise variance".into(),
            ));
        }
        let corr =
            |a: usize, b: usize| profile.frequency_correlation(num.frequency(a) - num.frequency(b));
        let mut filters = Vec::with_capacity(layout.num_users);
        let mut error_variance = Vec::with_capacity(layout.num_users);
        for u in 0..layout.num_users {
            let bins = layout.bins(u);
            let p = bins.len();
            // LS estimates on the comb carry noise sigma2 / |pilot|^2 = sigma2.
            let mut a = vec![Complex64::new(0.0, 0.0); p * p];
            for i in 0..p {
                for j in 0..p {
                    a[i * p + j] = corr(bins[i], bins[j]);
                }
                a[i * p + i] += sigma2;
            }
            cholesky_in_place(&mut a, p)?;
            let mut filt = vec![Complex64::new(0.0, 0.0); NUM_SUBCARRIERS * p];
            let mut mse = 0.0;
            let mut col = vec![Complex64::new(0.0, 0.0); p];
            for s in 0..NUM_SUBCARRIERS {
                // Row s of R_{sP} A^{-1} is (A^{-1} R_{Ps})ᴴ.
                for (c, &b) in col.iter_mut().zip(&bins) {
                    *c = corr(b, s);
                }
                let rhs = col.clone();
                cholesky_solve(&a, p, &mut col);
                let mut explained = 0.0;
                for j in 0..p {
                    filt[s * p + j] = col[j].conj();
                    explained += (rhs[j].conj() * col[j]).re;
                }
                mse += (1.0 - explained).max(0.0);
            }
            filters.push(filt);
            error_variance.push(mse / NUM_SUBCARRIERS as f64);
        }
        Ok(Self {
            layout,
            filters,
            error_variance,
        })
    }

    pub fn layout(&self) -> &PilotLayout {
        &self.layout
    }

    /// Estimates from the received pilot symbol of each antenna.
    pub fn estimate(&self, pilot_rx: &[ResourceGrid]) -> Result<ChannelEstimate> {
        let mut responses = Vec::with_capacity(self.layout.num_users);
        for u in 0..self.layout.num_users {
            let bins = self.layout.bins(u);
            let p = bins.len();
            let mut per_ant = Vec::with_capacity(pilot_rx.len());
            for g in pilot_rx {
                check_len("pilot symbols", 1, g.num_symbols())?;
                let ls: Vec<Complex64> = bins
                    .iter()
                    .zip(&self.layout.values[u])
                    .map(|(&s, &v)| g.get(s, 0) / v)
                    .collect();
                let h: Vec<Complex64> = (0..NUM_SUBCARRIERS)
                    .map(|s| {
                        self.filters[u][s * p..(s + 1) * p]
                            .iter()
                            .zip(&ls)
                            .map(|(w, y)| w * y)
                            .sum()
                    })
                    .collect();
                per_ant.push(h);
            }
            responses.push(per_ant);
        }
        Ok(ChannelEstimate {
            responses,
            error_variance: self.error_variance.clone(),
        })
    }
}

/// One-shot form of [`MmseEstimator`].
pub fn mmse_channel_estimate(
    pilot_rx: &[ResourceGrid],
    layout: &PilotLayout,
    profile: &PowerDelayProfile,
    sigma2: f64,
) -> Result<ChannelEstimate> {
    MmseEstimator::new(profile, layout.clone(), sigma2, &OfdmNumerology::default())?
        .estimate(pilot_rx)
}

/// Averaged `|E[H(s+k) H*(s)]| / E|H|²` for lags `0..max_lag`, estimated over
/// a set of 256-bin responses.
pub fn empirical_frequency_correlation(responses: &[Vec<Complex64>], max_lag: usize) -> Vec<f64> {
    let power: f64 = responses
        .iter()
        .flatten()
        .map(|h| h.norm_sqr())
        .sum::<f64>()
        / (responses.len() * NUM_SUBCARRIERS) as f64;
    (0..max_lag)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut n = 0usize;
            for h in responses {
                for s in 0..NUM_SUBCARRIERS - k {
                    acc += h[s + k] * h[s].conj();
                    n += 1;
                }
            }
            (acc / n as f64).norm() / power
        })
        .collect()
}

/// Smallest lag (in Hz) at which the correlation drops below `threshold`;
/// `None` if it never does within the measured lags.
pub fn coherence_bandwidth(correlation: &[f64], spacing_hz: f64, threshold: f64) -> Option<f64> {
    correlation
        .iter()
        .position(|&c| c < threshold)
        .map(|k| k as f64 * spacing_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn profiles_normalized_and_within_cp() {
        let num = OfdmNumerology::default();
        for p in [PowerDelayProfile::tdla(), PowerDelayProfile::bu()] {
            assert!((p.powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.delays.windows(2).all(|w| w[0] <= w[1]));
            assert!(p.max_delay() <= num.cp_duration());
        }
        let t = PowerDelayProfile::tdla().scaled_to_rms(30e-9).unwrap();
        assert!((t.rms_delay_spread() - 30e-9).abs() < 1e-15);
        assert!(PowerDelayProfile::tdla().scaled_to_rms(0.0).is_err());
        assert!(PowerDelayProfile::parse("# nothing\n", "x").is_err());
        assert!(PowerDelayProfile::parse("0 0\n-5 1\n", "x").is_err());
    }

    #[test]
    fn power_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = draw_user_powers(1000, PowerMode::interval_2db(), &mut rng).unwrap();
        assert!(o.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        let z = draw_user_powers(5, PowerMode::Interval { width_db: 0.0 }, &mut rng).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
        assert!(draw_user_powers(0, PowerMode::Equal, &mut rng).is_err());
    }

    #[test]
    fn cfo_bound_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            assert!(draw_cfo(&mut rng, 2e9, 0.1).abs() <= 200.0);
        }
        let x: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert_eq!(apply_cfo(&x, 0.0, 1e6), x);
    }

    #[test]
    fn comb_capacity() {
        let l = PilotLayout::new(6, 1).unwrap();
        assert_eq!(l.bins(0).len(), 43);
        assert_eq!(l.bins(5).len(), 42);
        assert!(PilotLayout::new(32, 1).is_ok());
        assert!(PilotLayout::new(33, 1).is_err());
    }
}
