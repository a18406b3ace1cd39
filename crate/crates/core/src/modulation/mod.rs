//! Unitary modulation bases for OSTF, OTFS, OFDM and OSTF-U signaling.
//!
//! Every basis is an `N x N` unitary matrix whose columns are the sampled
//! transmit waveforms. Symbols are indexed by slot `n` and tone `m` and
//! stacked column-wise: entry `(n, m)` sits at `n + m * N_t`.

pub mod qam;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::complex_gaussian;
pub use crate::dft::dft_matrix;
use crate::dft::{Direction, UnitaryDft};
use crate::grid::GridDesign;

/// Modulation scheme carried by a [`ModulationBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Ostf,
    Otfs,
    Ofdm,
    OstfU,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ofdm, Scheme::Ostf, Scheme::OstfU, Scheme::Otfs];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ostf => "ostf",
            Scheme::Otfs => "otfs",
            Scheme::Ofdm => "ofdm",
            Scheme::OstfU => "ostf-u",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ostf" => Ok(Scheme::Ostf),
            "otfs" => Ok(Scheme::Otfs),
            "ofdm" => Ok(Scheme::Ofdm),
            "ostf-u" | "ostf_u" | "ostfu" => Ok(Scheme::OstfU),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// A unitary modulation matrix together with the grid it was built on.
///
/// The dense matrix is materialized on first use; demodulation through
/// [`ModulationBasis::analyze`] never needs it.
#[derive(Debug, Clone)]
pub struct ModulationBasis {
    pub scheme: Scheme,
    pub grid: GridDesign,
    /// Random unitary precoder for OSTF-U (`U = U_stf * precoder`).
    precoder: Option<Mat<c64>>,
    dense: OnceLock<Mat<c64>>,
}

/// OSTF basis: column `(n, m)` is a unit-energy rectangular pulse on slot `n`
/// modulated by tone `m`, sampled at `1/W`.
///
/// With `F_o / W = 1 / N_f` the samples inside slot `n` are
/// `e^{j2pi m k / N_f} / sqrt(N_f)`, so the symmetric and wrapped tone
/// labelings produce identical columns.
pub fn ostf_matrix(grid: &GridDesign) -> ModulationBasis {
    ModulationBasis::new(Scheme::Ostf, *grid, None)
}

fn ostf_dense(grid: &GridDesign) -> Mat<c64> {
    let (n_t, n_f) = (grid.n_t, grid.n_f);
    let scale = 1.0 / (n_f as f64).sqrt();
    let mut u = Mat::<c64>::zeros(grid.n, grid.n);
    for slot in 0..n_t {
        for m in 0..n_f {
            let col = grid.vec_index(slot, m);
            let tone = grid.physical_tone(m);
            for i in 0..n_f {
                let k = slot * n_f + i;
                let cycles = (tone * k as i64).rem_euclid(n_f as i64) as f64 / n_f as f64;
                u[(k, col)] = c64::from_polar(scale, 2.0 * std::f64::consts::PI * cycles);
            }
        }
    }
    u
}

/// SFFT operator on column-stacked `N_t x N_f` arrays:
/// `U_sfft = U_{N_f}^{H*} kron U_{N_t}^H`.
pub fn sfft_matrix(n_t: usize, n_f: usize) -> Mat<c64> {
    let left = dft_matrix(n_f); // conj of the adjoint is the transpose; U_n is symmetric
    let right = dft_matrix(n_t).adjoint().to_owned();
    kron(left.as_ref(), right.as_ref())
}

/// Kronecker product `a kron b`.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// OTFS basis `U_stf * U_sfft^H`.
pub fn otfs_matrix(grid: &GridDesign) -> ModulationBasis {
    ModulationBasis::new(Scheme::Otfs, *grid, None)
}

/// OFDM basis: the OSTF construction on the single-slot grid.
pub fn ofdm_matrix(grid: &GridDesign) -> ModulationBasis {
    ModulationBasis::new(Scheme::Ofdm, grid.ofdm(), None)
}

/// Orthonormalizes the columns of an i.i.d. `CN(0, 1)` matrix.
///
/// The Householder factors are phase-corrected so the result equals what
/// Gram-Schmidt on the columns would give. A numerically rank-deficient draw
/// is replaced by a draw with the next seed.
pub fn random_unitary(n: usize, seed: u64) -> Mat<c64> {
    let mut seed = seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Mat::<c64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                g[(i, j)] = complex_gaussian(&mut rng);
            }
        }
        let qr = g.qr();
        let r = qr.R();
        let diag: Vec<c64> = (0..n).map(|i| r[(i, i)]).collect();
        let thr = 1e-10 * (n as f64).sqrt();
        if diag.iter().any(|d| d.norm().is_nan() || d.norm() <= thr) {
            seed = seed.wrapping_add(1);
            continue;
        }
        let mut q = qr.compute_Q();
        for (j, d) in diag.iter().enumerate() {
            let phase = d / d.norm();
            for v in q.col_as_slice_mut(j) {
                *v *= phase;
            }
        }
        return q;
    }
}

/// OSTF-U basis `U_stf * U` with `U` from [`random_unitary`].
pub fn ostf_u_matrix(grid: &GridDesign, seed: u64) -> ModulationBasis {
    ModulationBasis::new(Scheme::OstfU, *grid, Some(random_unitary(grid.n, seed)))
}

/// Builds the basis for `scheme` on the OSTF grid `grid`; `seed` is only used
/// by OSTF-U.
pub fn build_basis(scheme: Scheme, grid: &GridDesign, seed: u64) -> ModulationBasis {
    match scheme {
        Scheme::Ostf => ostf_matrix(grid),
        Scheme::Otfs => otfs_matrix(grid),
        Scheme::Ofdm => ofdm_matrix(grid),
        Scheme::OstfU => ostf_u_matrix(grid, seed),
    }
}

impl ModulationBasis {
    fn new(scheme: Scheme, grid: GridDesign, precoder: Option<Mat<c64>>) -> Self {
        Self {
            scheme,
            grid,
            precoder,
            dense: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.n
    }

    /// Dense `N x N` modulation matrix; columns are the modulation vectors.
    pub fn matrix(&self) -> &Mat<c64> {
        self.dense.get_or_init(|| {
            let ostf = ostf_dense(&self.grid);
            let right = match self.scheme {
                Scheme::Ostf | Scheme::Ofdm => return ostf,
                Scheme::Otfs => sfft_matrix(self.grid.n_t, self.grid.n_f).adjoint().to_owned(),
                Scheme::OstfU => self.precoder.clone().expect("OSTF-U basis carries its precoder"),
            };
            let mut u = Mat::<c64>::zeros(self.grid.n, self.grid.n);
            matmul(u.as_mut(), Accum::Replace, ostf.as_ref(), right.as_ref(), c64::new(1.0, 0.0), Par::Seq);
            u
        })
    }

    pub fn precoder(&self) -> Option<&Mat<c64>> {
        self.precoder.as_ref()
    }

    /// `max |U^H U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(self.matrix().as_ref())
    }

    /// Demodulates every column of `x`: returns `U^H x`.
    ///
    /// Uses the FFT structure of each scheme instead of the dense matrix.
    pub fn analyze(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(x.nrows(), self.dim(), "dimension mismatch");
        match self.scheme {
            Scheme::Ostf => ostf_analyze(&self.grid, x),
            Scheme::Ofdm => {
                let mut out = x.to_owned();
                let mut plan = UnitaryDft::new(self.dim());
                for j in 0..out.ncols() {
                    plan.apply(out.col_as_slice_mut(j), Direction::Analysis);
                }
                out
            }
            Scheme::Otfs => {
                let mut out = ostf_analyze(&self.grid, x);
                sfft_columns(&self.grid, &mut out);
                out
            }
            Scheme::OstfU => {
                let stf = ostf_analyze(&self.grid, x);
                let q = self.precoder.as_ref().expect("OSTF-U basis carries its precoder");
                let mut out = Mat::<c64>::zeros(stf.nrows(), stf.ncols());
                matmul(out.as_mut(), Accum::Replace, q.adjoint(), stf.as_ref(), c64::new(1.0, 0.0), Par::Seq);
                out
            }
        }
    }

    /// `U^H M U` through [`Self::analyze`] applied twice.
    pub fn conjugate(&self, m: MatRef<'_, c64>) -> Mat<c64> {
        let left = self.analyze(m.adjoint().to_owned().as_ref());
        self.analyze(left.adjoint().to_owned().as_ref())
    }
}

/// `max |A^H A - I|` for a square matrix.
pub fn unitarity_error(a: MatRef<'_, c64>) -> f64 {
    let n = a.ncols();
    let mut gram = Mat::<c64>::zeros(n, n);
    matmul(gram.as_mut(), Accum::Replace, a.adjoint(), a, c64::new(1.0, 0.0), Par::Seq);
    for i in 0..n {
        gram[(i, i)] -= c64::new(1.0, 0.0);
    }
    gram.norm_max()
}

/// `U_stf^H x` for every column: slot blocks are DFT-analyzed and scattered
/// into column-stacked order.
fn ostf_analyze(grid: &GridDesign, x: MatRef<'_, c64>) -> Mat<c64> {
    let (n_t, n_f) = (grid.n_t, grid.n_f);
    let mut plan = UnitaryDft::new(n_f);
    let mut out = Mat::<c64>::zeros(x.nrows(), x.ncols());
    let mut block = vec![c64::new(0.0, 0.0); n_f];
    for j in 0..x.ncols() {
        let src = x.col(j);
        let dst = out.col_as_slice_mut(j);
        for slot in 0..n_t {
            for (i, b) in block.iter_mut().enumerate() {
                *b = src[slot * n_f + i];
            }
            plan.apply(&mut block, Direction::Analysis);
            for (m, b) in block.iter().enumerate() {
                dst[slot + m * n_t] = *b;
            }
        }
    }
    out
}

/// Applies the SFFT `X -> U_{N_t}^H X U_{N_f}` to each column-stacked column.
fn sfft_columns(grid: &GridDesign, x: &mut Mat<c64>) {
    let (n_t, n_f) = (grid.n_t, grid.n_f);
    let mut slots = UnitaryDft::new(n_t);
    let mut tones = UnitaryDft::new(n_f);
    let mut tmp = Vec::with_capacity(n_f.max(n_t));
    for j in 0..x.ncols() {
        let col = x.col_as_slice_mut(j);
        for m in 0..n_f {
            slots.apply(&mut col[m * n_t..(m + 1) * n_t], Direction::Analysis);
        }
        for n in 0..n_t {
            tones.apply_strided(col, n, n_t, &mut tmp, Direction::Synthesis);
        }
    }
}

/// Applies the SFFT to a single column-stacked `N_t x N_f` array.
pub fn sfft_vector(grid: &GridDesign, x: &[c64]) -> Vec<c64> {
    let mut m = Mat::from_fn(x.len(), 1, |i, _| x[i]);
    sfft_columns(grid, &mut m);
    m.col_as_slice(0).to_vec()
}
