//! Gray-mapped 4-QAM.
//!
//! | bits | symbol            |
//! |------|-------------------|
//! | 00   | ( 1 + j) / sqrt 2 |
//! | 10   | (-1 + j) / sqrt 2 |
//! | 11   | (-1 - j) / sqrt 2 |
//! | 01   | ( 1 - j) / sqrt 2 |
//!
//! The first bit selects the sign of the real part, the second the sign of the
//! imaginary part, so neighbouring points differ in one bit.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::c64;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("4-QAM needs an even number of bits, got {0}")]
pub struct OddBitCount(pub usize);

/// Unit-power 4-QAM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector(pub Vec<c64>);

impl SymbolVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[c64] {
        &self.0
    }
}

#[inline]
fn level(bit: bool) -> f64 {
    if bit {
        -FRAC_1_SQRT_2
    } else {
        FRAC_1_SQRT_2
    }
}

pub fn qam4_map(bits: &[bool]) -> Result<SymbolVector, OddBitCount> {
    if !bits.len().is_multiple_of(2) {
        return Err(OddBitCount(bits.len()));
    }
    Ok(SymbolVector(
        bits.chunks_exact(2)
            .map(|b| c64::new(level(b[0]), level(b[1])))
            .collect(),
    ))
}

/// Nearest-point decisions: the recovered bits and the decided symbols.
pub fn qam4_demap(z: &[c64]) -> (Vec<bool>, SymbolVector) {
    let mut bits = Vec::with_capacity(2 * z.len());
    let mut symbols = Vec::with_capacity(z.len());
    for v in z {
        let (b0, b1) = (v.re < 0.0, v.im < 0.0);
        bits.push(b0);
        bits.push(b1);
        symbols.push(c64::new(level(b0), level(b1)));
    }
    (bits, SymbolVector(symbols))
}

/// Random bits and their 4-QAM symbols.
pub fn random_symbols<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<bool>, SymbolVector) {
    let bits: Vec<bool> = (0..2 * n).map(|_| rng.random()).collect();
    let symbols = qam4_map(&bits).expect("even bit count");
    (bits, symbols)
}
