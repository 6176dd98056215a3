//! Frequency-domain resource grid shared by all users of a frame.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const NUM_SUBCARRIERS: usize = 256;
pub const NUM_DATA_SYMBOLS: usize = 4;
pub const NUM_DATA_RES: usize = NUM_SUBCARRIERS * NUM_DATA_SYMBOLS;

/// Complex values indexed by `(subcarrier, ofdm_symbol)`, stored symbol-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    num_symbols: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn zeros(num_symbols: usize) -> Self {
        Self {
            num_symbols,
            data: vec![Complex64::new(0.0, 0.0); num_symbols * NUM_SUBCARRIERS],
        }
    }

    /// Standard 256 x 4 data grid.
    pub fn data_grid() -> Self {
        Self::zeros(NUM_DATA_SYMBOLS)
    }

    pub fn from_vec(num_symbols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != num_symbols * NUM_SUBCARRIERS {
            return Err(Error::LengthMismatch {
                what: "resource grid",
                expected: num_symbols * NUM_SUBCARRIERS,
                got: data.len(),
            });
        }
        Ok(Self { num_symbols, data })
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(sc: usize, sym: usize) -> usize {
        sym * NUM_SUBCARRIERS + sc
    }

    #[inline]
    pub fn get(&self, sc: usize, sym: usize) -> Complex64 {
        self.data[Self::index(sc, sym)]
    }

    #[inline]
    pub fn set(&mut self, sc: usize, sym: usize, v: Complex64) {
        self.data[Self::index(sc, sym)] = v;
    }

    pub fn symbol(&self, sym: usize) -> &[Complex64] {
        &self.data[sym * NUM_SUBCARRIERS..(sym + 1) * NUM_SUBCARRIERS]
    }

    pub fn symbol_mut(&mut self, sym: usize) -> &mut [Complex64] {
        &mut self.data[sym * NUM_SUBCARRIERS..(sym + 1) * NUM_SUBCARRIERS]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.num_symbols != other.num_symbols {
            return Err(Error::LengthMismatch {
                what: "grid symbols",
                expected: self.num_symbols,
                got: other.num_symbols,
            });
        }
        Ok(())
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, other: &Self, a: Complex64) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        Ok(())
    }

    /// `self -= other`.
    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        Ok(())
    }

    /// Copies symbols `from..from+count` into a new grid.
    pub fn symbols(&self, from: usize, count: usize) -> Self {
        Self {
            num_symbols: count,
            data: self.data[from * NUM_SUBCARRIERS..(from + count) * NUM_SUBCARRIERS].to_vec(),
        }
    }

    /// Stacks `self` on top of `other` along the symbol axis.
    pub fn concat(&self, other: &Self) -> Self {
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self {
            num_symbols: self.num_symbols + other.num_symbols,
            data,
        }
    }
}
