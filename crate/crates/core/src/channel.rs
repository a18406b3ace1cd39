//! Doubly dispersive multipath channel: random path draws and the critically
//! sampled time-varying frequency response.

use std::f64::consts::PI;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dft::{Direction, UnitaryDft};
use crate::grid::GridDesign;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("a channel needs at least one path")]
    NoPaths,
    #[error("path {index}: delay {delay} s outside [0, {tau_max}]")]
    DelayOutOfRange { index: usize, delay: f64, tau_max: f64 },
    #[error("path {index}: Doppler {doppler} Hz outside [-{nu_max}, {nu_max}]")]
    DopplerOutOfRange { index: usize, doppler: f64, nu_max: f64 },
    #[error("spreads must be non-negative and finite (tau_max = {tau_max}, nu_max = {nu_max})")]
    BadSpread { tau_max: f64, nu_max: f64 },
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Delay, seconds.
    pub delay: f64,
    /// Doppler shift, hertz.
    pub doppler: f64,
    /// Complex amplitude.
    pub gain: c64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<Path>,
    pub tau_max: f64,
    pub nu_max: f64,
    /// Per-path average powers, summing to one.
    pub power_profile: Vec<f64>,
}

/// Exponentially decaying path powers `e^{-l/N_p}`, `l = 1..=N_p`, rescaled
/// to unit sum.
pub fn exponential_power_profile(n_paths: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n_paths)
        .map(|l| (-(l as f64) / n_paths as f64).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draws `n_paths` paths with delays uniform on `[0, tau_max]`, Dopplers
/// uniform on `[-nu_max, nu_max]` and circular Gaussian gains whose variances
/// follow [`exponential_power_profile`].
pub fn draw_channel(tau_max: f64, nu_max: f64, n_paths: usize, seed: u64) -> ChannelRealization {
    assert!(n_paths >= 1, "a channel needs at least one path");
    assert!(tau_max >= 0.0 && nu_max >= 0.0, "spreads must be non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let power_profile = exponential_power_profile(n_paths);
    let paths = power_profile
        .iter()
        .map(|&power| {
            let delay = rng.random::<f64>() * tau_max;
            let doppler = (2.0 * rng.random::<f64>() - 1.0) * nu_max;
            let gain = complex_gaussian(&mut rng) * power.sqrt();
            Path { delay, doppler, gain }
        })
        .collect();
    ChannelRealization {
        paths,
        tau_max,
        nu_max,
        power_profile,
    }
}

/// Unit-variance circularly symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl ChannelRealization {
    /// Builds a deterministic channel from explicit paths. The power profile
    /// is taken from the normalized path powers `|gain|^2`.
    pub fn from_paths(paths: Vec<Path>, tau_max: f64, nu_max: f64) -> Result<Self, ChannelError> {
        if !(tau_max >= 0.0 && nu_max >= 0.0 && tau_max.is_finite() && nu_max.is_finite()) {
            return Err(ChannelError::BadSpread { tau_max, nu_max });
        }
        if paths.is_empty() {
            return Err(ChannelError::NoPaths);
        }
        for (index, p) in paths.iter().enumerate() {
            if !(0.0..=tau_max).contains(&p.delay) {
                return Err(ChannelError::DelayOutOfRange {
                    index,
                    delay: p.delay,
                    tau_max,
                });
            }
            if !(-nu_max..=nu_max).contains(&p.doppler) {
                return Err(ChannelError::DopplerOutOfRange {
                    index,
                    doppler: p.doppler,
                    nu_max,
                });
            }
        }
        let total: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        let power_profile = paths
            .iter()
            .map(|p| if total > 0.0 { p.gain.norm_sqr() / total } else { 0.0 })
            .collect();
        Ok(Self {
            paths,
            tau_max,
            nu_max,
            power_profile,
        })
    }

    /// A single path with no delay, no Doppler and unit gain.
    pub fn flat() -> Self {
        Self::from_paths(
            vec![Path {
                delay: 0.0,
                doppler: 0.0,
                gain: c64::new(1.0, 0.0),
            }],
            0.0,
            0.0,
        )
        .expect("flat channel is valid")
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Time-varying frequency response `H(t, f)`.
    pub fn response(&self, t: f64, f: f64) -> c64 {
        self.paths
            .iter()
            .map(|p| p.gain * c64::cis(-2.0 * PI * p.delay * f) * c64::cis(2.0 * PI * p.doppler * t))
            .sum()
    }
}

/// Critically sampled channel on an `N x N` time-frequency lattice.
#[derive(Debug, Clone)]
pub struct SampledChannel {
    /// `H[n, m] = H(n dt, m df)`.
    pub h: Mat<c64>,
    /// `H[n, m] e^{j2pi nm/N} / sqrt(N)`; with this scaling a flat channel
    /// satisfies `H_tilde U_N^H = I`.
    pub h_tilde: Mat<c64>,
}

/// `e^{j2pi x}` with `x` reduced to `[0, 1)` first.
fn cis_cycles(x: f64) -> c64 {
    c64::cis(2.0 * PI * (x - x.floor()))
}

/// Samples `H(t, f)` at `t = n dt`, `f = m df` for `n, m` in `0..N`.
pub fn sample_channel(ch: &ChannelRealization, grid: &GridDesign) -> SampledChannel {
    let n = grid.n;
    let np = ch.paths.len();
    // H = B A with B[n, l] = e^{j2pi nu_l n dt} and A[l, m] = alpha_l e^{-j2pi tau_l m df}
    let time = Mat::from_fn(n, np, |t, l| cis_cycles(ch.paths[l].doppler * t as f64 * grid.delta_t));
    let freq = Mat::from_fn(np, n, |l, m| {
        ch.paths[l].gain * cis_cycles(-ch.paths[l].delay * m as f64 * grid.delta_f)
    });
    let mut h = Mat::<c64>::zeros(n, n);
    matmul(h.as_mut(), Accum::Replace, time.as_ref(), freq.as_ref(), c64::new(1.0, 0.0), Par::Seq);
    let scale = 1.0 / (n as f64).sqrt();
    let h_tilde = Mat::from_fn(n, n, |a, b| {
        let k = (a * b) % n;
        h[(a, b)] * c64::from_polar(scale, 2.0 * PI * k as f64 / n as f64)
    });
    SampledChannel { h, h_tilde }
}

impl SampledChannel {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Sample-domain channel matrix `G = H_tilde U_N^H`, i.e. `r = G s + w`.
    pub fn time_domain(&self) -> Mat<c64> {
        // rows of H_tilde are transformed; work on the transpose so each row is contiguous
        let n = self.dim();
        let mut t = self.h_tilde.transpose().to_owned();
        let mut plan = UnitaryDft::new(n);
        for j in 0..n {
            plan.apply(t.col_as_slice_mut(j), Direction::Analysis);
        }
        t.transpose().to_owned()
    }
}

/// Delay-Doppler spreading function: the 2-D unitary DFT of `H`, mapping the
/// time axis to Doppler bins (rows) and the frequency axis to delay bins
/// (columns). A path at `(l0 / W, k0 / T)` peaks at `(k0 mod N, l0 mod N)`.
pub fn spreading_function(sc: &SampledChannel) -> Mat<c64> {
    let n = sc.dim();
    let mut plan = UnitaryDft::new(n);
    // columns: time -> Doppler
    let mut tmp = sc.h.to_owned();
    for j in 0..n {
        plan.apply(tmp.col_as_slice_mut(j), Direction::Analysis);
    }
    // rows: frequency -> delay
    let mut t = tmp.transpose().to_owned();
    for j in 0..n {
        plan.apply(t.col_as_slice_mut(j), Direction::Synthesis);
    }
    t.transpose().to_owned()
}
