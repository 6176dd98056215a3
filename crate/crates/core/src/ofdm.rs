//! CP-OFDM modulation between the 256-subcarrier grid and baseband samples.
//!
//! The 256 used subcarriers sit on bins -128..-1 and 1..128 of a 512-point
//! transform, DC is left empty. Grid subcarrier `s < 128` maps to frequency
//! index `s - 128`, `s >= 128` to `s - 127`. Transforms are unitary.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::grid::{ResourceGrid, NUM_SUBCARRIERS};

/// Table-driven OFDM numerology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmNumerology {
    pub fft_size: usize,
    pub used_subcarriers: usize,
    pub cp_samples: usize,
    /// Useful symbol duration in seconds.
    pub symbol_duration: f64,
    pub carrier_frequency: f64,
}

impl Default for OfdmNumerology {
    fn default() -> Self {
        Self {
            fft_size: 512,
            used_subcarriers: NUM_SUBCARRIERS,
            cp_samples: 128,
            symbol_duration: 60e-6,
            carrier_frequency: 2e9,
        }
    }
}

impl OfdmNumerology {
    pub fn sample_rate(&self) -> f64 {
        self.fft_size as f64 / self.symbol_duration
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / self.symbol_duration
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_samples as f64 / self.sample_rate()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_samples
    }

    /// Signed frequency index (in subcarrier spacings) of grid subcarrier `sc`.
    pub fn freq_index(&self, sc: usize) -> i64 {
        let half = (self.used_subcarriers / 2) as i64;
        let s = sc as i64;
        if s < half {
            s - half
        } else {
            s - half + 1
        }
    }

    /// FFT bin of grid subcarrier `sc`.
    pub fn bin(&self, sc: usize) -> usize {
        self.freq_index(sc).rem_euclid(self.fft_size as i64) as usize
    }

    /// Baseband frequency of grid subcarrier `sc` in Hz.
    pub fn frequency(&self, sc: usize) -> f64 {
        self.freq_index(sc) as f64 * self.subcarrier_spacing()
    }
}

/// Modulator/demodulator with cached FFT plans.
#[derive(Clone)]
pub struct OfdmModem {
    num: OfdmNumerology,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("num", &self.num).finish()
    }
}

impl OfdmModem {
    pub fn new(num: OfdmNumerology) -> Result<Self> {
        if num.used_subcarriers != NUM_SUBCARRIERS || num.used_subcarriers >= num.fft_size {
            return Err(Error::InvalidArgument(format!(
                "need {NUM_SUBCARRIERS} used subcarriers below the FFT size, got {} of {}",
                num.used_subcarriers, num.fft_size
            )));
        }
        if num.cp_samples > num.fft_size {
            return Err(Error::InvalidArgument(
                "cyclic prefix longer than the symbol".into(),
            ));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            num,
            forward: planner.plan_fft_forward(num.fft_size),
            inverse: planner.plan_fft_inverse(num.fft_size),
        })
    }

    pub fn numerology(&self) -> &OfdmNumerology {
        &self.num
    }

    pub fn signal_len(&self, num_symbols: usize) -> usize {
        num_symbols * self.num.samples_per_symbol()
    }

    pub fn grid_to_time(&self, grid: &ResourceGrid) -> Vec<Complex64> {
        let n = self.num.fft_size;
        let cp = self.num.cp_samples;
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = Vec::with_capacity(self.signal_len(grid.num_symbols()));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..grid.num_symbols() {
            buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for (sc, &v) in grid.symbol(t).iter().enumerate() {
                buf[self.num.bin(sc)] = v * scale;
            }
            self.inverse.process(&mut buf);
            out.extend_from_slice(&buf[n - cp..]);
            out.extend_from_slice(&buf);
        }
        out
    }

    pub fn time_to_grid(&self, signal: &[Complex64], num_symbols: usize) -> Result<ResourceGrid> {
        check_len("time signal", self.signal_len(num_symbols), signal.len())?;
        let n = self.num.fft_size;
        let cp = self.num.cp_samples;
        let scale = 1.0 / (n as f64).sqrt();
        let mut grid = ResourceGrid::zeros(num_symbols);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..num_symbols {
            let start = t * self.num.samples_per_symbol() + cp;
            buf.copy_from_slice(&signal[start..start + n]);
            self.forward.process(&mut buf);
            for (sc, slot) in grid.symbol_mut(t).iter_mut().enumerate() {
                *slot = buf[self.num.bin(sc)] * scale;
            }
        }
        Ok(grid)
    }
}

/// Writes time-domain streams for offline inspection.
///
/// Layout, all little-endian: 8-byte magic `NOMAIQ01`, then `u32` FFT size,
/// `u32` CP samples, `u32` OFDM symbols, `u32` stream count, `f64` sample
/// rate, followed by each stream in turn as interleaved `f32` re/im pairs.
pub fn write_debug_dump(
    path: &Path,
    num: &OfdmNumerology,
    num_symbols: usize,
    streams: &[Vec<Complex64>],
) -> Result<()> {
    let expected = num_symbols * num.samples_per_symbol();
    for s in streams {
        check_len("dump stream", expected, s.len())?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(b"NOMAIQ01")?;
    for v in [num.fft_size, num.cp_samples, num_symbols, streams.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&num.sample_rate().to_le_bytes())?;
    for s in streams {
        for x in s {
            w.write_all(&(x.re as f32).to_le_bytes())?;
            w.write_all(&(x.im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
