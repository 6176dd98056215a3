//! Scenario files.
//!
//! TOML, one scenario per file:
//!
//! ```toml
//! name = "awgn-150"            # optional, default "scenario"
//! schemes = ["musa", "ofdm"]   # required
//! channel = "awgn"             # required: awgn | awgn_cfo | tdla | bu
//! power_mode = "interval"      # interval (default) | equal | wide_range
//! power_interval_db = 2.0      # interval width, default 2
//! se = "1/4"                   # "1/4" (default) or "1/6"
//! rx_antennas = 2              # 1 or 2, default 2
//! csi = "ideal"                # ideal | mmse; default mmse for awgn_cfo, else ideal
//! snr_db = [-4, -2, 0]         # default [0]
//! overload_pct = [150, 300]    # multiples of 25, default [150]
//! trials = 10000               # default 10000
//! seed = 1                     # default 1
//! early_stop = true            # default true: stop at >=100 errors and >=1000 trials
//! workers = 4                  # default: all cores
//!
//! [receiver]
//! list_size = 16
//! mpa_iterations = 8
//! mpa_tolerance = 1e-6
//! sic_outer_iterations = 2
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, PowerMode};
use crate::error::{Error, Result};
use crate::schemes::{users_for_overload, Scheme};

/// Target spectral efficiency per user (info+CRC bits per resource element).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralEfficiency {
    Quarter,
    Sixth,
}

impl SpectralEfficiency {
    /// Info block length including the CRC.
    pub fn k(self) -> usize {
        match self {
            SpectralEfficiency::Quarter => 256,
            SpectralEfficiency::Sixth => 171,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpectralEfficiency::Quarter => "1/4",
            SpectralEfficiency::Sixth => "1/6",
        }
    }
}

impl FromStr for SpectralEfficiency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/4" | "0.25" => Ok(SpectralEfficiency::Quarter),
            "1/6" => Ok(SpectralEfficiency::Sixth),
            other => Err(Error::Config(format!(
                "se must be \"1/4\" or \"1/6\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    Ideal,
    Mmse,
}

impl CsiMode {
    /// Pilot-based estimation for the CFO scenario, genie CSI elsewhere.
    pub fn default_for(channel: ChannelKind) -> Self {
        if channel.has_cfo() {
            CsiMode::Mmse
        } else {
            CsiMode::Ideal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Ideal => "ideal",
            CsiMode::Mmse => "mmse",
        }
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ideal" => Ok(CsiMode::Ideal),
            "mmse" => Ok(CsiMode::Mmse),
            other => Err(Error::Config(format!(
                "csi must be \"ideal\" or \"mmse\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    pub list_size: usize,
    pub mpa_iterations: usize,
    pub mpa_tolerance: f64,
    pub sic_outer_iterations: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            list_size: 16,
            mpa_iterations: 8,
            mpa_tolerance: 1e-6,
            sic_outer_iterations: 2,
        }
    }
}

/// File representation, before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_name")]
    name: String,
    schemes: Vec<String>,
    channel: String,
    #[serde(default = "default_power_mode")]
    power_mode: String,
    #[serde(default = "default_interval")]
    power_interval_db: f64,
    #[serde(default = "default_se")]
    se: String,
    #[serde(default = "default_rx")]
    rx_antennas: usize,
    #[serde(default)]
    csi: Option<String>,
    #[serde(default = "default_snr")]
    snr_db: Vec<f64>,
    #[serde(default = "default_overload")]
    overload_pct: Vec<u32>,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_true")]
    early_stop: bool,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    receiver: ReceiverConfig,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_power_mode() -> String {
    "interval".into()
}
fn default_interval() -> f64 {
    2.0
}
fn default_se() -> String {
    "1/4".into()
}
fn default_rx() -> usize {
    2
}
fn default_snr() -> Vec<f64> {
    vec![0.0]
}
fn default_overload() -> Vec<u32> {
    vec![150]
}
fn default_trials() -> u64 {
    DEFAULT_TRIALS
}
fn default_seed() -> u64 {
    1
}
fn default_true() -> bool {
    true
}

pub const DEFAULT_TRIALS: u64 = 10_000;

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub schemes: Vec<Scheme>,
    pub channel: ChannelKind,
    pub power_mode: PowerMode,
    pub se: SpectralEfficiency,
    pub rx_antennas: usize,
    pub csi: CsiMode,
    pub snr_db: Vec<f64>,
    pub overload_pct: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    pub early_stop: bool,
    /// `None` uses every available core.
    pub workers: Option<usize>,
    pub receiver: ReceiverConfig,
}

impl ScenarioConfig {
    /// A one-scheme scenario with the documented defaults.
    pub fn new(scheme: Scheme, channel: ChannelKind) -> Self {
        Self {
            name: default_name(),
            schemes: vec![scheme],
            channel,
            power_mode: PowerMode::interval_2db(),
            se: SpectralEfficiency::Quarter,
            rx_antennas: default_rx(),
            csi: CsiMode::default_for(channel),
            snr_db: default_snr(),
            overload_pct: default_overload(),
            trials: DEFAULT_TRIALS,
            seed: default_seed(),
            early_stop: true,
            workers: None,
            receiver: ReceiverConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let power_mode = match raw.power_mode.as_str() {
            "interval" => PowerMode::Interval {
                width_db: raw.power_interval_db,
            },
            "equal" => PowerMode::Equal,
            "wide_range" => PowerMode::wide_range(),
            other => {
                return Err(Error::Config(format!(
                    "power_mode must be one of interval, equal, wide_range; got \"{other}\""
                )))
            }
        };
        let channel: ChannelKind = raw.channel.parse()?;
        let csi = match &raw.csi {
            Some(c) => c.parse()?,
            None => CsiMode::default_for(channel),
        };
        let cfg = Self {
            name: raw.name,
            schemes: raw
                .schemes
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?,
            channel,
            power_mode,
            se: raw.se.parse()?,
            rx_antennas: raw.rx_antennas,
            csi,
            snr_db: raw.snr_db,
            overload_pct: raw.overload_pct,
            trials: raw.trials,
            seed: raw.seed,
            early_stop: raw.early_stop,
            workers: raw.workers,
            receiver: raw.receiver,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.schemes.is_empty() {
            problems.push("schemes must not be empty".to_string());
        }
        if self.snr_db.is_empty() {
            problems.push("snr_db must not be empty".to_string());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            problems.push("snr_db values must be finite".to_string());
        }
        if self.overload_pct.is_empty() {
            problems.push("overload_pct must not be empty".to_string());
        }
        for &o in &self.overload_pct {
            if let Err(e) = users_for_overload(o) {
                problems.push(e.to_string());
            }
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if !(1..=2).contains(&self.rx_antennas) {
            problems.push(format!(
                "rx_antennas must be 1 or 2, got {}",
                self.rx_antennas
            ));
        }
        if self.workers == Some(0) {
            problems.push("workers must be at least 1".to_string());
        }
        if let PowerMode::Interval { width_db } = self.power_mode {
            if !(width_db >= 0.0) {
                problems.push(format!(
                    "power_interval_db must be non-negative, got {width_db}"
                ));
            }
        }
        let r = &self.receiver;
        if r.list_size == 0 || !r.list_size.is_power_of_two() {
            problems.push(format!(
                "receiver.list_size must be a power of two, got {}",
                r.list_size
            ));
        }
        if r.mpa_iterations == 0 {
            problems.push("receiver.mpa_iterations must be at least 1".to_string());
        }
        if r.sic_outer_iterations == 0 {
            problems.push("receiver.sic_outer_iterations must be at least 1".to_string());
        }
        if self.schemes.contains(&Scheme::Scma) {
            for &o in self.overload_pct.iter().filter(|&&o| o > 150) {
                problems.push(format!(
                    "SCMA is only defined up to 150% overload (6 codebooks on 4 resources), got {o}%"
                ));
            }
        }
        if self.csi == CsiMode::Mmse {
            for &o in &self.overload_pct {
                if let Ok(u) = users_for_overload(o) {
                    if u > 256 / crate::channel::MIN_PILOTS_PER_USER {
                        problems.push(format!(
                            "mmse CSI supports at most 800% overload (pilot comb), got {o}%"
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Resolved configuration as TOML, for the run manifest.
    pub fn to_toml(&self) -> String {
        let (power_mode, width) = match self.power_mode {
            PowerMode::Interval { width_db } => ("interval", width_db),
            PowerMode::Equal => ("equal", 0.0),
            PowerMode::WideRange { .. } => ("wide_range", 0.0),
        };
        let raw = RawConfig {
            name: self.name.clone(),
            schemes: self.schemes.iter().map(|s| s.name().to_string()).collect(),
            channel: self.channel.name().to_string(),
            power_mode: power_mode.to_string(),
            power_interval_db: width,
            se: self.se.as_str().to_string(),
            rx_antennas: self.rx_antennas,
            csi: Some(self.csi.as_str().to_string()),
            snr_db: self.snr_db.clone(),
            overload_pct: self.overload_pct.clone(),
            trials: self.trials,
            seed: self.seed,
            early_stop: self.early_stop,
            workers: self.workers,
            receiver: self.receiver,
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}

/// Parses `a:b:step` into an inclusive list of SNR points.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || {
        Error::Config(format!(
            "SNR range must look like start:stop:step, got \"{s}\""
        ))
    };
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match nums.as_slice() {
        [a] => Ok(vec![*a]),
        [a, b, step] if *step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // Rounded to 1e-9 so accumulated steps print cleanly.
            Ok((0..=n)
                .map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(bad()),
    }
}

/// Parses a comma-separated overload list such as `100,150,300`.
pub fn parse_overload_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|p| {
            let p = p.trim().trim_end_matches('%');
            p.parse::<u32>()
                .map_err(|_| Error::Config(format!("bad overload value \"{p}\"")))
        })
        .collect()
}
