//! Unitary DFT helpers shared by the channel and modulation code.
//!
//! Sign convention follows the unitary DFT matrix `U_n[a, b] = e^{j2pi ab/n} / sqrt(n)`:
//! [`Direction::Synthesis`] applies `U_n`, [`Direction::Analysis`] applies `U_n^H`.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{c64, Mat, MatRef};
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Multiply by `U_n` (positive exponent).
    Synthesis,
    /// Multiply by `U_n^H` (negative exponent).
    Analysis,
}

/// A planned length-`n` unitary DFT.
pub struct UnitaryDft {
    n: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<c64>,
}

impl UnitaryDft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            scale: 1.0 / (n as f64).sqrt(),
            forward,
            inverse,
            scratch: vec![c64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Transforms a contiguous buffer of length `n` in place.
    pub fn apply(&mut self, buf: &mut [c64], dir: Direction) {
        debug_assert_eq!(buf.len(), self.n);
        match dir {
            Direction::Synthesis => self.inverse.process_with_scratch(buf, &mut self.scratch),
            Direction::Analysis => self.forward.process_with_scratch(buf, &mut self.scratch),
        }
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Transforms the strided subsequence `data[offset + k * stride]`,
    /// `k = 0..n`, in place using `tmp` as staging.
    pub fn apply_strided(
        &mut self,
        data: &mut [c64],
        offset: usize,
        stride: usize,
        tmp: &mut Vec<c64>,
        dir: Direction,
    ) {
        tmp.clear();
        tmp.extend((0..self.n).map(|k| data[offset + k * stride]));
        self.apply(tmp, dir);
        for (k, v) in tmp.iter().enumerate() {
            data[offset + k * stride] = *v;
        }
    }
}

/// Dense unitary DFT matrix: entry `(a, b)` is `e^{j2pi ab/n} / sqrt(n)`.
pub fn dft_matrix(n: usize) -> Mat<c64> {
    assert!(n >= 1, "DFT size must be at least 1");
    let scale = 1.0 / (n as f64).sqrt();
    Mat::from_fn(n, n, |a, b| {
        // reduce the exponent mod n before scaling to keep the phase exact
        let k = (a * b) % n;
        c64::from_polar(scale, 2.0 * PI * k as f64 / n as f64)
    })
}

/// Applies a length-`rows` unitary DFT to every column of `m`.
pub fn dft_columns(m: MatRef<'_, c64>, dir: Direction) -> Mat<c64> {
    let mut out = m.to_owned();
    let mut plan = UnitaryDft::new(out.nrows());
    for j in 0..out.ncols() {
        plan.apply(out.col_as_slice_mut(j), dir);
    }
    out
}

/// Conjugate transpose as an owned, column-major matrix.
pub fn adjoint(m: MatRef<'_, c64>) -> Mat<c64> {
    m.adjoint().to_owned()
}
