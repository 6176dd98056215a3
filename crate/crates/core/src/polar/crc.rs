//! CRC-16-CCITT (x^16 + x^12 + x^5 + 1) over bit sequences.
//!
//! Zero initial register, no reflection, no final XOR. Bits are fed MSB-first
//! in sequence order and the 16 check bits are appended MSB-first.

use crate::error::{Error, Result};

pub const CRC_LEN: usize = 16;
const POLY: u16 = 0x1021;

const fn make_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg = (i as u16) << 8;
        let mut b = 0;
        while b < 8 {
            reg = if reg & 0x8000 != 0 {
                (reg << 1) ^ POLY
            } else {
                reg << 1
            };
            b += 1;
        }
        table[i] = reg;
        i += 1;
    }
    table
}

static TABLE: [u16; 256] = make_table();

/// Register value after shifting in `bits` (each 0 or 1).
pub fn crc16(bits: &[u8]) -> u16 {
    let mut reg = 0u16;
    let mut chunks = bits.chunks_exact(8);
    for chunk in &mut chunks {
        let byte = chunk.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1));
        reg = (reg << 8) ^ TABLE[(((reg >> 8) as u8) ^ byte) as usize];
    }
    for &b in chunks.remainder() {
        let top = ((reg >> 15) as u8) ^ (b & 1);
        reg <<= 1;
        if top != 0 {
            reg ^= POLY;
        }
    }
    reg
}

/// `payload ∥ crc16(payload)`.
pub fn crc16_attach(payload: &[u8]) -> Result<Vec<u8>> {
    if payload.is_empty() {
        return Err(Error::InvalidArgument("empty CRC payload".into()));
    }
    let crc = crc16(payload);
    let mut out = Vec::with_capacity(payload.len() + CRC_LEN);
    out.extend_from_slice(payload);
    out.extend((0..CRC_LEN).rev().map(|i| ((crc >> i) & 1) as u8));
    Ok(out)
}

/// True when the trailing 16 bits match the CRC of the leading bits.
pub fn crc16_check(block: &[u8]) -> Result<bool> {
    if block.len() <= CRC_LEN {
        return Err(Error::InvalidArgument(format!(
            "CRC check needs at least {} bits, got {}",
            CRC_LEN + 1,
            block.len()
        )));
    }
    // A valid block leaves a zero register when fed through whole.
    Ok(crc16(block) == 0)
}
