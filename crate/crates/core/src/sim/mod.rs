//! Monte Carlo execution: one trial is a full transmit/channel/receive chain,
//! a point aggregates trials, a sweep walks schemes x overloads x SNRs.
//!
//! SNR is the per-user Es/N0 per resource element per receive antenna: every
//! user radiates frame energy 1024 over the 1024 data resources and the noise
//! variance per resource element is `10^(-snr/10)`. Power offsets shift each
//! user's received energy around that mean.

mod config;
mod output;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

pub use config::{
    parse_overload_list, parse_snr_range, CsiMode, ReceiverConfig, ScenarioConfig,
    SpectralEfficiency, DEFAULT_TRIALS,
};
pub use output::{
    csv_string, emit_csv, emit_manifest, emit_plot, parse_csv, plot_value, render_svg,
    SNR_DEFINITION,
};

use crate::channel::{
    apply_channel_freq, apply_channel_time, genie_csi, ChannelSetup, MmseEstimator, PilotLayout,
};
use crate::error::{Error, Result};
use crate::grid::ResourceGrid;
use crate::ofdm::{OfdmModem, OfdmNumerology};
use crate::polar::{polar_encode, PolarCodeConfig, SclDecoder};
use crate::qpsk::{qpsk_hard, qpsk_map};
use crate::receiver::{scma_detect, sic_detect, MpaConfig, RxContext, SicConfig};
use crate::rng::{Purpose, StreamKey};
use crate::schemes::{
    build_users, direct_map, modulate_user, users_for_overload, Detector, Scheme, SignatureTables,
    UserTxConfig,
};

pub const CRC_LENGTH: usize = 16;
const BATCH: u64 = 100;
const EARLY_STOP_ERRORS: u64 = 100;
const EARLY_STOP_MIN_TRIALS: u64 = 1000;

/// BLER measurement at one operating point.
#[derive(Debug, Clone)]
pub struct BlerRecord {
    pub scenario: String,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub overload_pct: u32,
    pub per_user_bler: Vec<f64>,
    pub trials: u64,
    /// Seconds spent on the point. Not written to CSV and ignored by `==`.
    pub wall_time: f64,
}

impl PartialEq for BlerRecord {
    fn eq(&self, o: &Self) -> bool {
        self.scenario == o.scenario
            && self.scheme == o.scheme
            && self.snr_db.to_bits() == o.snr_db.to_bits()
            && self.overload_pct == o.overload_pct
            && self.per_user_bler == o.per_user_bler
            && self.trials == o.trials
    }
}

impl BlerRecord {
    pub fn avg_bler(&self) -> f64 {
        if self.per_user_bler.is_empty() {
            return 0.0;
        }
        self.per_user_bler.iter().sum::<f64>() / self.per_user_bler.len() as f64
    }

    /// Binomial standard error `√(b(1-b)/n)` of user `u`.
    pub fn stderr(&self, u: usize) -> f64 {
        let b = self.per_user_bler[u];
        (b * (1.0 - b) / self.trials as f64).sqrt()
    }

    pub fn num_users(&self) -> usize {
        self.per_user_bler.len()
    }
}

/// Everything fixed for one (scheme, overload, SNR) point.
struct Point {
    scheme: Scheme,
    code: PolarCodeConfig,
    users: Vec<UserTxConfig>,
    sigma2: f64,
    estimator: Option<MmseEstimator>,
}

/// Prepared simulator for one scenario.
pub struct Simulator {
    cfg: ScenarioConfig,
    setup: ChannelSetup,
    modem: OfdmModem,
    tables: SignatureTables,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("cfg", &self.cfg).finish()
    }
}

impl Simulator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        Self::with_tables(cfg, SignatureTables::default())
    }

    pub fn with_tables(cfg: ScenarioConfig, tables: SignatureTables) -> Result<Self> {
        cfg.validate()?;
        // Every user must carry exactly K info+CRC bits whatever its scheme.
        for &s in &cfg.schemes {
            let code = PolarCodeConfig::new(s.block_length(), cfg.se.k(), CRC_LENGTH)?;
            if code.k() != cfg.se.k() {
                return Err(Error::InvalidCode(format!("{s}: payload parity violated")));
            }
        }
        let setup = ChannelSetup::new(cfg.channel, cfg.rx_antennas, cfg.power_mode)?;
        let modem = OfdmModem::new(OfdmNumerology::default())?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cfg.workers {
            builder = builder.num_threads(w);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            cfg,
            setup,
            modem,
            tables,
            pool,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    fn point(&self, scheme: Scheme, overload_pct: u32, snr_db: f64) -> Result<Point> {
        let num_users = users_for_overload(overload_pct)?;
        let code = PolarCodeConfig::new(scheme.block_length(), self.cfg.se.k(), CRC_LENGTH)?;
        let users = build_users(scheme, num_users, self.cfg.seed, &code, &self.tables)?;
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let estimator = match self.cfg.csi {
            CsiMode::Ideal => None,
            CsiMode::Mmse => Some(MmseEstimator::new(
                &self.setup.profile,
                PilotLayout::new(num_users, self.cfg.seed)?,
                sigma2,
                self.modem.numerology(),
            )?),
        };
        Ok(Point {
            scheme,
            code,
            users,
            sigma2,
            estimator,
        })
    }

    fn trial(
        &self,
        p: &Point,
        trial: u64,
        decoder: &mut SclDecoder,
        trace: Option<&mut Vec<String>>,
    ) -> Result<Vec<bool>> {
        let seed = self.cfg.seed;
        let real = self.setup.draw(p.users.len(), seed, trial)?;
        let mut payloads = Vec::with_capacity(p.users.len());
        let mut tx = Vec::with_capacity(p.users.len());
        for (u, user) in p.users.iter().enumerate() {
            let mut rng = StreamKey::new(seed, Purpose::Payload)
                .trial(trial)
                .user(u as u64)
                .rng();
            let payload: Vec<u8> = (0..p.code.payload_len())
                .map(|_| rng.gen::<bool>() as u8)
                .collect();
            let info = p.code.attach_crc(&payload)?;
            let cw = polar_encode(&info, &p.code, &user.frozen)?;
            let mut grid = modulate_user(user, &cw, &self.tables)?;
            if let Some(est) = &p.estimator {
                grid = est.layout().pilot_grid(u).concat(&grid);
            }
            payloads.push(payload);
            tx.push(grid);
        }
        let received = if self.cfg.channel.has_cfo() {
            apply_channel_time(&tx, &real, &self.modem, p.sigma2, seed, trial)?
        } else {
            apply_channel_freq(&tx, &real, p.sigma2, seed, trial)?
        };
        let (csi, sigma2_eff, data) = match &p.estimator {
            None => (genie_csi(&real), p.sigma2, received),
            Some(est) => {
                let pilots: Vec<ResourceGrid> = received.iter().map(|g| g.symbols(0, 1)).collect();
                let data: Vec<ResourceGrid> = received
                    .iter()
                    .map(|g| g.symbols(1, g.num_symbols() - 1))
                    .collect();
                let e = est.estimate(&pilots)?;
                let s2 = p.sigma2 + e.error_variance.iter().sum::<f64>();
                (e.responses, s2, data)
            }
        };
        let ctx = RxContext {
            users: &p.users,
            csi: &csi,
            sigma2: sigma2_eff,
            tables: &self.tables,
        };
        let rc = &self.cfg.receiver;
        let decisions = match p.scheme.detector() {
            Detector::Mpa => scma_detect(
                &data,
                &ctx,
                decoder,
                &MpaConfig {
                    max_iterations: rc.mpa_iterations,
                    tolerance: rc.mpa_tolerance,
                },
            )?,
            Detector::MmseSic | Detector::MfSic => sic_detect(
                &data,
                &ctx,
                decoder,
                &SicConfig {
                    outer_iterations: rc.sic_outer_iterations,
                },
                trace,
            )?,
        };
        Ok(decisions
            .iter()
            .zip(&payloads)
            .map(|(d, pl)| !(d.crc_ok && &d.payload == pl))
            .collect())
    }

    /// Block-error indicators of every user for one trial.
    pub fn run_trial(
        &self,
        scheme: Scheme,
        overload_pct: u32,
        snr_db: f64,
        trial: u64,
    ) -> Result<Vec<bool>> {
        let p = self.point(scheme, overload_pct, snr_db)?;
        let mut dec = SclDecoder::new(&p.code, self.cfg.receiver.list_size)?;
        self.trial(&p, trial, &mut dec, None)
    }

    /// Like [`Simulator::run_trial`], also returning the SIC decode order.
    pub fn trace_trial(
        &self,
        scheme: Scheme,
        overload_pct: u32,
        snr_db: f64,
        trial: u64,
    ) -> Result<(Vec<bool>, Vec<String>)> {
        let p = self.point(scheme, overload_pct, snr_db)?;
        let mut dec = SclDecoder::new(&p.code, self.cfg.receiver.list_size)?;
        let mut trace = Vec::new();
        let errs = self.trial(&p, trial, &mut dec, Some(&mut trace))?;
        Ok((errs, trace))
    }

    /// Aggregates up to `trials` trials. Trials run in fixed batches so the
    /// early-stop decision, and hence the output, is independent of the
    /// number of workers.
    pub fn run_point(
        &self,
        scheme: Scheme,
        overload_pct: u32,
        snr_db: f64,
        trials: u64,
    ) -> Result<BlerRecord> {
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let start = Instant::now();
        let p = self.point(scheme, overload_pct, snr_db)?;
        let list = self.cfg.receiver.list_size;
        let mut errors = vec![0u64; p.users.len()];
        let mut done = 0u64;
        while done < trials {
            let end = (done + BATCH).min(trials);
            let batch: Vec<Vec<bool>> = self.pool.install(|| {
                (done..end)
                    .into_par_iter()
                    .map_init(
                        || SclDecoder::new(&p.code, list),
                        |dec, t| match dec {
                            Ok(d) => self.trial(&p, t, d, None),
                            Err(e) => Err(Error::InvalidCode(e.to_string())),
                        },
                    )
                    .collect::<Result<_>>()
            })?;
            for r in &batch {
                for (e, &x) in errors.iter_mut().zip(r) {
                    *e += x as u64;
                }
            }
            done = end;
            if self.cfg.early_stop
                && done >= EARLY_STOP_MIN_TRIALS
                && errors.iter().sum::<u64>() >= EARLY_STOP_ERRORS
            {
                break;
            }
        }
        Ok(BlerRecord {
            scenario: self.cfg.name.clone(),
            scheme,
            snr_db,
            overload_pct,
            per_user_bler: errors.iter().map(|&e| e as f64 / done as f64).collect(),
            trials: done,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    /// One record per (scheme, overload, SNR), in that nesting order.
    pub fn run_sweep(&self) -> Result<Vec<BlerRecord>> {
        self.run_sweep_with(|_| {})
    }

    /// [`Simulator::run_sweep`] with a callback after each point.
    pub fn run_sweep_with(&self, mut progress: impl FnMut(&BlerRecord)) -> Result<Vec<BlerRecord>> {
        let mut out = Vec::new();
        for &scheme in &self.cfg.schemes {
            for &o in &self.cfg.overload_pct {
                for &snr in &self.cfg.snr_db {
                    let r = self.run_point(scheme, o, snr, self.cfg.trials)?;
                    progress(&r);
                    out.push(r);
                }
            }
        }
        Ok(out)
    }
}

/// Uncoded QPSK over AWGN with hard decisions, for calibration. Returns
/// `(bit errors, bits)`; `num_bits` is rounded up to whole frames.
pub fn uncoded_qpsk_ber(ebn0_db: f64, num_bits: u64, seed: u64) -> Result<(u64, u64)> {
    use crate::channel::add_noise;
    use crate::grid::NUM_DATA_RES;
    // Unit-energy symbols carry two bits: Es/N0 = 2 Eb/N0.
    let sigma2 = 1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0));
    let bits_per_frame = 2 * NUM_DATA_RES as u64;
    let frames = num_bits.div_ceil(bits_per_frame);
    let mut errors = 0;
    for f in 0..frames {
        let mut rng = StreamKey::new(seed, Purpose::Payload).trial(f).rng();
        let bits: Vec<u8> = (0..bits_per_frame)
            .map(|_| rng.gen::<bool>() as u8)
            .collect();
        let mut grid = direct_map(&qpsk_map(&bits)?)?;
        add_noise(
            &mut grid,
            sigma2,
            &mut StreamKey::new(seed, Purpose::Noise).trial(f).rng(),
        );
        for (y, b) in grid.as_slice().iter().zip(bits.chunks_exact(2)) {
            let (h0, h1) = qpsk_hard(*y);
            errors += (h0 != b[0]) as u64 + (h1 != b[1]) as u64;
        }
    }
    Ok((errors, frames * bits_per_frame))
}
