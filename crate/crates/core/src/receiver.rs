//! Effective channels, linear MMSE receivers and the link metrics derived
//! from them (per-dimension SINR, capacity, eigen-benchmark capacity and the
//! diagonality metric).

use std::fmt;
use std::str::FromStr;

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{matmul as triangular_matmul, BlockStructure};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{c64, Accum, Mat, MatRef, Par, Side};
use thiserror::Error;

use crate::channel::SampledChannel;
use crate::modulation::ModulationBasis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("dimension mismatch: basis is {basis}x{basis}, channel is {channel}x{channel}")]
    DimensionMismatch { basis: usize, channel: usize },
    #[error("channel matrix contains non-finite entries")]
    NonFinite,
    #[error("SNR must be positive and finite, got {0}")]
    BadSnr(f64),
    #[error("Cholesky factorization of the received covariance failed")]
    Factorization,
    #[error("eigenvalue computation did not converge")]
    Eigen,
    #[error("diagonality metric is undefined for the zero matrix")]
    ZeroMatrix,
}

/// How much channel knowledge the MMSE filter is designed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CsiMode {
    /// The full effective channel matrix.
    Full,
    /// Only its diagonal entries; the resulting filter is diagonal.
    Diag,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Full => "full",
            CsiMode::Diag => "diag",
        }
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CsiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(CsiMode::Full),
            "diag" | "diagonal" => Ok(CsiMode::Diag),
            other => Err(format!("unknown CSI mode `{other}` (expected full or diag)")),
        }
    }
}

/// Effective channel `U^H H_tilde U_N^H U` seen between modulator input and
/// demodulator output.
pub fn effective_channel(basis: &ModulationBasis, sc: &SampledChannel) -> Result<Mat<c64>, ReceiverError> {
    if basis.dim() != sc.dim() {
        return Err(ReceiverError::DimensionMismatch {
            basis: basis.dim(),
            channel: sc.dim(),
        });
    }
    let g = sc.time_domain();
    Ok(basis.conjugate(g.as_ref()))
}

/// MMSE receiver designed for `y = sqrt(snr) H x + w`.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    pub h_eff: Mat<c64>,
    /// `W = R^{-1} H`; the filter output is `W^H y`.
    pub filter: Mat<c64>,
    /// Composite channel `W^H H`.
    pub composite: Mat<c64>,
    /// Diagonal of the filtered noise covariance `R_v = W^H W`.
    pub noise_variance: Vec<f64>,
    pub snr: f64,
    pub csi_mode: CsiMode,
}

fn check_finite(m: MatRef<'_, c64>) -> Result<(), ReceiverError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(ReceiverError::NonFinite);
            }
        }
    }
    Ok(())
}

/// Designs the MMSE filter `W = (snr H H^H + I)^{-1} H`.
///
/// In [`CsiMode::Diag`] the formula is applied to `diag(H)`, giving
/// `w_n = h_nn / (snr |h_nn|^2 + 1)`; the composite channel still uses the
/// full `H` so residual interference is accounted for.
pub fn mmse_filter(h_eff: Mat<c64>, snr: f64, csi_mode: CsiMode) -> Result<ReceiverState, ReceiverError> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(ReceiverError::BadSnr(snr));
    }
    check_finite(h_eff.as_ref())?;
    let n = h_eff.nrows();
    let one = c64::new(1.0, 0.0);
    let (filter, composite) = match csi_mode {
        CsiMode::Full => {
            let mut r = Mat::<c64>::zeros(n, n);
            triangular_matmul(
                r.as_mut(),
                BlockStructure::TriangularLower,
                Accum::Replace,
                h_eff.as_ref(),
                BlockStructure::Rectangular,
                h_eff.adjoint(),
                BlockStructure::Rectangular,
                c64::new(snr, 0.0),
                Par::Seq,
            );
            for i in 0..n {
                r[(i, i)] += one;
            }
            let llt = r.llt(Side::Lower).map_err(|_| ReceiverError::Factorization)?;
            let l = llt.L();
            let mut w = h_eff.clone();
            solve_lower_triangular_in_place(l, w.as_mut(), Par::Seq);
            solve_upper_triangular_in_place(l.adjoint(), w.as_mut(), Par::Seq);
            let mut hc = Mat::<c64>::zeros(n, n);
            matmul(hc.as_mut(), Accum::Replace, w.adjoint(), h_eff.as_ref(), one, Par::Seq);
            (w, hc)
        }
        CsiMode::Diag => {
            let w_diag: Vec<c64> = (0..n)
                .map(|i| {
                    let d = h_eff[(i, i)];
                    d / (snr * d.norm_sqr() + 1.0)
                })
                .collect();
            let w = Mat::from_fn(n, n, |i, j| if i == j { w_diag[i] } else { c64::new(0.0, 0.0) });
            let hc = Mat::from_fn(n, n, |i, j| w_diag[i].conj() * h_eff[(i, j)]);
            (w, hc)
        }
    };
    let noise_variance = (0..n)
        .map(|j| filter.col(j).iter().map(|v| v.norm_sqr()).sum())
        .collect();
    Ok(ReceiverState {
        h_eff,
        filter,
        composite,
        noise_variance,
        snr,
        csi_mode,
    })
}

impl ReceiverState {
    pub fn dim(&self) -> usize {
        self.h_eff.nrows()
    }

    /// Full filtered-noise covariance `W^H W`.
    pub fn noise_covariance(&self) -> Mat<c64> {
        let n = self.dim();
        let mut rv = Mat::<c64>::zeros(n, n);
        matmul(
            rv.as_mut(),
            Accum::Replace,
            self.filter.adjoint(),
            self.filter.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        rv
    }

    /// Filter output `z = W^H y`.
    pub fn filter_output(&self, y: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(y.len(), n);
        (0..n)
            .map(|j| self.filter.col(j).iter().zip(y).map(|(w, v)| w.conj() * v).sum())
            .collect()
    }

    /// Symbol estimates `z_n / (sqrt(snr) H_c[n, n])` for received `y`.
    pub fn estimate(&self, y: &[c64]) -> Vec<c64> {
        let gain = self.snr.sqrt();
        self.filter_output(y)
            .into_iter()
            .enumerate()
            .map(|(i, z)| {
                let d = self.composite[(i, i)] * gain;
                if d.norm_sqr() > 0.0 {
                    z / d
                } else {
                    z
                }
            })
            .collect()
    }
}

/// Per-dimension output SINR
/// `snr |Hc[n,n]|^2 / (snr sum_{i != n} |Hc[n,i]|^2 + R_v[n,n])`.
pub fn sinr_per_dimension(rs: &ReceiverState) -> Vec<f64> {
    let n = rs.dim();
    let hc = &rs.composite;
    let mut interference = vec![0.0; n];
    for j in 0..n {
        for (i, v) in hc.col(j).iter().enumerate() {
            if i != j {
                interference[i] += v.norm_sqr();
            }
        }
    }
    (0..n)
        .map(|i| {
            let noise = rs.noise_variance[i];
            if noise == 0.0 {
                return 0.0;
            }
            let signal = rs.snr * hc[(i, i)].norm_sqr();
            signal / (rs.snr * interference[i] + noise)
        })
        .collect()
}

/// Capacity per dimension `mean(log2(1 + SINR))`, bps/Hz.
pub fn capacity(sinr: &[f64]) -> f64 {
    if sinr.is_empty() {
        return 0.0;
    }
    sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinr.len() as f64
}

/// Eigenvalues of `H^H H` (squared singular values of `H`), ascending.
pub fn channel_eigenvalues(h: MatRef<'_, c64>) -> Result<Vec<f64>, ReceiverError> {
    check_finite(h)?;
    let n = h.ncols();
    let mut gram = Mat::<c64>::zeros(n, n);
    triangular_matmul(
        gram.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        h.adjoint(),
        BlockStructure::Rectangular,
        h,
        BlockStructure::Rectangular,
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    let eig = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| ReceiverError::Eigen)?;
    Ok(eig.into_iter().map(|l| l.max(0.0)).collect())
}

/// Capacity of the eigen-benchmark from precomputed eigenvalues.
pub fn eig_capacity_from_eigenvalues(eigenvalues: &[f64], snr: f64) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    eigenvalues.iter().map(|l| (1.0 + snr * l).log2()).sum::<f64>() / eigenvalues.len() as f64
}

/// Capacity with equal power over the singular vectors of `H`.
pub fn eig_capacity(h_eff: MatRef<'_, c64>, snr: f64) -> Result<f64, ReceiverError> {
    Ok(eig_capacity_from_eigenvalues(&channel_eigenvalues(h_eff)?, snr))
}

/// Fraction of squared Frobenius norm carried by the diagonal.
pub fn diagonality_metric(m: MatRef<'_, c64>) -> Result<f64, ReceiverError> {
    let mut diag = 0.0;
    let mut total = 0.0;
    for j in 0..m.ncols() {
        for (i, v) in m.col(j).iter().enumerate() {
            let p = v.norm_sqr();
            total += p;
            if i == j {
                diag += p;
            }
        }
    }
    if total == 0.0 {
        return Err(ReceiverError::ZeroMatrix);
    }
    Ok(diag / total)
}

/// Summary metrics of one receiver design.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    pub capacity_bps_hz: f64,
    /// Diagonality of the effective channel.
    pub gamma: f64,
    pub eig_capacity_bps_hz: f64,
}

impl LinkMetrics {
    pub fn evaluate(rs: &ReceiverState) -> Result<Self, ReceiverError> {
        let sinr = sinr_per_dimension(rs);
        Ok(Self {
            capacity_bps_hz: capacity(&sinr),
            sinr,
            gamma: diagonality_metric(rs.h_eff.as_ref())?,
            eig_capacity_bps_hz: eig_capacity(rs.h_eff.as_ref(), rs.snr)?,
        })
    }
}
