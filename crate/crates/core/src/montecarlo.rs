//! Seeded Monte Carlo link simulation across schemes, SNR points and CSI
//! modes.
//!
//! Every trial draws one channel realization. For each SNR point one block of
//! `N` 4-QAM symbols and one noise vector are drawn and shared by all systems
//! in that trial, so scheme comparisons are paired.
//!
//! Random streams are derived from `(base_seed, trial_index, stream, index)`
//! through a SplitMix64 chain (see [`derive_seed`]). Trials therefore do not
//! depend on each other, and results are identical for any thread count.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{complex_gaussian, draw_channel, sample_channel, ChannelRealization};
use crate::grid::{design_grid, GridDesign, GridError};
use crate::modulation::qam::{qam4_demap, random_symbols};
use crate::modulation::{build_basis, ModulationBasis, Scheme};
use crate::receiver::{
    capacity, channel_eigenvalues, diagonality_metric, eig_capacity_from_eigenvalues, mmse_filter,
    sinr_per_dimension, CsiMode, ReceiverError,
};

/// A simulated system: one of the modulation schemes or the eigen benchmark.
///
/// Declaration order is alphabetical by name and fixes output row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum System {
    Eig,
    Ofdm,
    Ostf,
    OstfU,
    Otfs,
}

impl System {
    pub const ALL: [System; 5] = [System::Eig, System::Ofdm, System::Ostf, System::OstfU, System::Otfs];

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            System::Eig => None,
            System::Ofdm => Some(Scheme::Ofdm),
            System::Ostf => Some(Scheme::Ostf),
            System::OstfU => Some(Scheme::OstfU),
            System::Otfs => Some(Scheme::Otfs),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            System::Eig => "eig",
            other => other.scheme().expect("modulation scheme").as_str(),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("eig") {
            return Ok(System::Eig);
        }
        Ok(match s.parse::<Scheme>()? {
            Scheme::Ofdm => System::Ofdm,
            Scheme::Ostf => System::Ostf,
            Scheme::OstfU => System::OstfU,
            Scheme::Otfs => System::Otfs,
        })
    }
}

/// Where trial channels come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Fresh random realization per trial.
    Random,
    /// The same fixed channel in every trial.
    Fixed(ChannelRealization),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Carrier frequency; metadata only.
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tau_max: f64,
    pub nu_max: f64,
    pub paths: usize,
    pub n_t_hint: usize,
    pub snr_points_db: Vec<f64>,
    pub trials: usize,
    pub systems: BTreeSet<System>,
    pub csi_mode: CsiMode,
    pub base_seed: u64,
    pub channel: ChannelModel,
}

impl ScenarioConfig {
    /// 4 GHz, 15 MHz, 300 ns delay spread, 1.85 kHz Doppler spread, 30 paths.
    pub fn moderate() -> Self {
        Self {
            name: "moderate".into(),
            carrier_hz: 4e9,
            bandwidth_hz: 15e6,
            tau_max: 300e-9,
            nu_max: 1.85e3,
            paths: 30,
            n_t_hint: 9,
            snr_points_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 100,
            systems: System::ALL.into_iter().collect(),
            csi_mode: CsiMode::Full,
            base_seed: 1,
            channel: ChannelModel::Random,
        }
    }

    /// Large-spread variant: 700 ns delay spread, 9.26 kHz Doppler spread.
    pub fn extreme() -> Self {
        Self {
            name: "extreme".into(),
            tau_max: 700e-9,
            nu_max: 9.26e3,
            n_t_hint: 13,
            ..Self::moderate()
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "moderate" => Some(Self::moderate()),
            "extreme" => Some(Self::extreme()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 2] = ["moderate", "extreme"];

    /// Checks every invariant and returns all violations.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push("name must not be empty".to_string());
        }
        for (key, v) in [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("tau_max_s", self.tau_max),
            ("nu_max_hz", self.nu_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{key} must be positive and finite, got {v}"));
            }
        }
        if self.tau_max > 0.0 && self.nu_max > 0.0 && self.tau_max * 2.0 * self.nu_max >= 1.0 {
            errs.push(format!(
                "channel is overspread: tau_max * 2 * nu_max = {} (must be < 1)",
                self.tau_max * 2.0 * self.nu_max
            ));
        }
        if self.paths < 1 {
            errs.push("paths must be at least 1".to_string());
        }
        if self.n_t_hint < 1 {
            errs.push("n_t must be at least 1".to_string());
        }
        if self.trials < 1 {
            errs.push("trials must be at least 1".to_string());
        }
        if self.snr_points_db.is_empty() {
            errs.push("snr_db list must not be empty".to_string());
        }
        if let Some(bad) = self.snr_points_db.iter().find(|v| !v.is_finite()) {
            errs.push(format!("snr_db values must be finite, got {bad}"));
        }
        if self.systems.is_empty() {
            errs.push("schemes must not be empty".to_string());
        }
        if errs.is_empty() {
            if let Err(e) = self.grid() {
                errs.push(format!("grid design failed: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn grid(&self) -> Result<GridDesign, GridError> {
        design_grid(self.tau_max, self.nu_max, self.bandwidth_hz, Some(self.n_t_hint))
    }

    /// SNR points in ascending order, duplicates removed.
    pub fn sorted_snr_db(&self) -> Vec<f64> {
        let mut v = self.snr_points_db.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("trial {trial}, system {system}: {source}")]
    Numerical {
        trial: usize,
        system: System,
        #[source]
        source: ReceiverError,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Random stream tags used by [`derive_seed`].
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const PRECODER: u64 = 2;
    pub const SYMBOLS: u64 = 3;
    pub const NOISE: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `stream`, sub-index `index` of trial `trial`:
/// `s = splitmix(splitmix(splitmix(splitmix(base) ^ trial) ^ stream) ^ index)`.
pub fn derive_seed(base: u64, trial: u64, stream: u64, index: u64) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ stream);
    splitmix64(h ^ index)
}

/// Outcome for one system at one SNR point of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub snr_db: f64,
    pub capacity: f64,
    pub gamma_hc: f64,
    pub sinr_mean: f64,
    pub sinr_min: f64,
    pub sinr_max: f64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub symbols: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemTrial {
    pub system: System,
    /// Diagonality of the effective channel (1 for the eigen benchmark).
    pub gamma_h: f64,
    /// One entry per configured SNR point, in configuration order.
    pub points: Vec<PointResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub channel_seed: u64,
    pub systems: Vec<SystemTrial>,
}

impl TrialResult {
    pub fn system(&self, system: System) -> Option<&SystemTrial> {
        self.systems.iter().find(|s| s.system == system)
    }
}

/// Symbols and noise handed to a system, exposed for pairing checks.
pub struct TransmissionRecord<'a> {
    pub system: System,
    pub snr_index: usize,
    pub symbols: &'a [c64],
    pub noise: &'a [c64],
}

struct Block {
    bits: Vec<bool>,
    symbols: Vec<c64>,
    noise: Vec<c64>,
}

fn draw_block(cfg: &ScenarioConfig, trial: usize, snr_index: usize, n: usize) -> Block {
    let t = trial as u64;
    let k = snr_index as u64;
    let mut sym_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, t, stream::SYMBOLS, k));
    let (bits, symbols) = random_symbols(n, &mut sym_rng);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, t, stream::NOISE, k));
    let noise = (0..n).map(|_| complex_gaussian(&mut noise_rng)).collect();
    Block {
        bits,
        symbols: symbols.0,
        noise,
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn count_errors(block: &Block, estimates: &[c64]) -> (u64, u64) {
    let (bits, _) = qam4_demap(estimates);
    let mut symbol_errors = 0;
    let mut bit_errors = 0;
    for (sent, got) in block.bits.chunks_exact(2).zip(bits.chunks_exact(2)) {
        let e = (sent[0] != got[0]) as u64 + (sent[1] != got[1]) as u64;
        bit_errors += e;
        symbol_errors += (e > 0) as u64;
    }
    (symbol_errors, bit_errors)
}

fn sinr_summary(sinr: &[f64]) -> (f64, f64, f64) {
    let mean = sinr.iter().sum::<f64>() / sinr.len() as f64;
    let min = sinr.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sinr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

fn matvec(h: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![c64::new(0.0, 0.0); h.nrows()];
    for (j, xj) in x.iter().enumerate() {
        for (yi, hij) in y.iter_mut().zip(h.col(j).iter()) {
            *yi += hij * xj;
        }
    }
    y
}

/// The channel realization used by trial `trial_index`.
pub fn trial_channel(cfg: &ScenarioConfig, trial_index: usize) -> ChannelRealization {
    match &cfg.channel {
        ChannelModel::Random => draw_channel(
            cfg.tau_max,
            cfg.nu_max,
            cfg.paths,
            derive_seed(cfg.base_seed, trial_index as u64, stream::CHANNEL, 0),
        ),
        ChannelModel::Fixed(ch) => ch.clone(),
    }
}

/// The basis used by trial `trial_index`; only OSTF-U depends on the trial.
pub fn trial_basis(cfg: &ScenarioConfig, grid: &GridDesign, scheme: Scheme, trial_index: usize) -> ModulationBasis {
    build_basis(scheme, grid, derive_seed(cfg.base_seed, trial_index as u64, stream::PRECODER, 0))
}

/// Runs one trial. See [`run_trial_observed`].
pub fn run_trial(cfg: &ScenarioConfig, trial_index: usize) -> Result<TrialResult, SimError> {
    run_trial_observed(cfg, trial_index, &mut |_| {})
}

/// Runs one trial and reports each (system, SNR) transmission to `observer`.
pub fn run_trial_observed(
    cfg: &ScenarioConfig,
    trial_index: usize,
    observer: &mut dyn FnMut(TransmissionRecord<'_>),
) -> Result<TrialResult, SimError> {
    cfg.validate().map_err(SimError::Config)?;
    let grid = cfg.grid()?;
    let n = grid.n;
    let t = trial_index as u64;
    let channel_seed = derive_seed(cfg.base_seed, t, stream::CHANNEL, 0);
    let channel = trial_channel(cfg, trial_index);
    let time_domain = sample_channel(&channel, &grid).time_domain();
    let snrs: Vec<(f64, f64)> = cfg.snr_points_db.iter().map(|&db| (db, db_to_linear(db))).collect();
    let blocks: Vec<Block> = (0..snrs.len()).map(|k| draw_block(cfg, trial_index, k, n)).collect();
    let numerical = |system: System| move |source: ReceiverError| SimError::Numerical {
        trial: trial_index,
        system,
        source,
    };

    let mut systems = Vec::with_capacity(cfg.systems.len());
    for &system in &cfg.systems {
        let result = match system.scheme() {
            Some(scheme) => {
                let basis = trial_basis(cfg, &grid, scheme, trial_index);
                let h = basis.conjugate(time_domain.as_ref());
                let gamma_h = diagonality_metric(h.as_ref()).map_err(numerical(system))?;
                let mut points = Vec::with_capacity(snrs.len());
                for (k, (&(snr_db, snr), block)) in snrs.iter().zip(&blocks).enumerate() {
                    observer(TransmissionRecord {
                        system,
                        snr_index: k,
                        symbols: &block.symbols,
                        noise: &block.noise,
                    });
                    let rs = mmse_filter(h.clone(), snr, cfg.csi_mode).map_err(numerical(system))?;
                    let gain = snr.sqrt();
                    let y: Vec<c64> = matvec(&h, &block.symbols)
                        .into_iter()
                        .zip(&block.noise)
                        .map(|(hx, w)| hx * gain + w)
                        .collect();
                    let (symbol_errors, bit_errors) = count_errors(block, &rs.estimate(&y));
                    let sinr = sinr_per_dimension(&rs);
                    let (sinr_mean, sinr_min, sinr_max) = sinr_summary(&sinr);
                    points.push(PointResult {
                        snr_db,
                        capacity: capacity(&sinr),
                        gamma_hc: diagonality_metric(rs.composite.as_ref()).map_err(numerical(system))?,
                        sinr_mean,
                        sinr_min,
                        sinr_max,
                        symbol_errors,
                        bit_errors,
                        symbols: n as u64,
                    });
                }
                SystemTrial { system, gamma_h, points }
            }
            None => {
                // eigen benchmark: spectrum of the sample-domain channel, shared by all bases
                let eigenvalues = channel_eigenvalues(time_domain.as_ref()).map_err(numerical(system))?;
                let mut points = Vec::with_capacity(snrs.len());
                for (k, (&(snr_db, snr), block)) in snrs.iter().zip(&blocks).enumerate() {
                    observer(TransmissionRecord {
                        system,
                        snr_index: k,
                        symbols: &block.symbols,
                        noise: &block.noise,
                    });
                    let estimates: Vec<c64> = eigenvalues
                        .iter()
                        .zip(block.symbols.iter().zip(&block.noise))
                        .map(|(&l, (x, w))| {
                            let g = (snr * l).sqrt();
                            let z = x * g + w;
                            if g > 0.0 {
                                z / g
                            } else {
                                z
                            }
                        })
                        .collect();
                    let (symbol_errors, bit_errors) = count_errors(block, &estimates);
                    let sinr: Vec<f64> = eigenvalues.iter().map(|l| snr * l).collect();
                    let (sinr_mean, sinr_min, sinr_max) = sinr_summary(&sinr);
                    points.push(PointResult {
                        snr_db,
                        capacity: eig_capacity_from_eigenvalues(&eigenvalues, snr),
                        gamma_hc: 1.0,
                        sinr_mean,
                        sinr_min,
                        sinr_max,
                        symbol_errors,
                        bit_errors,
                        symbols: n as u64,
                    });
                }
                SystemTrial {
                    system,
                    gamma_h: 1.0,
                    points,
                }
            }
        };
        systems.push(result);
    }
    Ok(TrialResult {
        trial_index,
        channel_seed,
        systems,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Aggregated statistics for one (system, SNR) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub system: System,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_capacity: f64,
    /// Linear mean of the effective-channel diagonality.
    pub mean_gamma_h: f64,
    /// Linear mean of the composite-channel diagonality.
    pub mean_gamma_hc: f64,
    pub mean_sinr: f64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub symbols_sent: u64,
}

/// Wilson score interval for `k` successes out of `n`, 95% coverage.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

impl AggregatePoint {
    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols_sent as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / (2 * self.symbols_sent) as f64
    }

    pub fn ser_interval(&self) -> (f64, f64) {
        wilson_interval(self.symbol_errors, self.symbols_sent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub scenario: String,
    pub csi_mode: CsiMode,
    pub base_seed: u64,
    pub trials: usize,
    /// Ordered by system, then ascending SNR.
    pub points: Vec<AggregatePoint>,
}

impl AggregateResult {
    /// Reduces trial results in trial order.
    pub fn from_trials(cfg: &ScenarioConfig, trials: &[TrialResult]) -> Self {
        let mut points = Vec::new();
        for &system in &cfg.systems {
            for (k, &snr_db) in cfg.snr_points_db.iter().enumerate() {
                let mut cap = CompensatedSum::default();
                let mut gh = CompensatedSum::default();
                let mut ghc = CompensatedSum::default();
                let mut sinr = CompensatedSum::default();
                let (mut se, mut be, mut sent) = (0u64, 0u64, 0u64);
                let mut count = 0usize;
                for t in trials {
                    let Some(st) = t.system(system) else { continue };
                    let p = &st.points[k];
                    cap.add(p.capacity);
                    gh.add(st.gamma_h);
                    ghc.add(p.gamma_hc);
                    sinr.add(p.sinr_mean);
                    se += p.symbol_errors;
                    be += p.bit_errors;
                    sent += p.symbols;
                    count += 1;
                }
                let denom = count.max(1) as f64;
                points.push(AggregatePoint {
                    system,
                    snr_db,
                    trials: count,
                    mean_capacity: cap.value() / denom,
                    mean_gamma_h: gh.value() / denom,
                    mean_gamma_hc: ghc.value() / denom,
                    mean_sinr: sinr.value() / denom,
                    symbol_errors: se,
                    bit_errors: be,
                    symbols_sent: sent,
                });
            }
        }
        points.sort_by(|a, b| a.system.cmp(&b.system).then(a.snr_db.total_cmp(&b.snr_db)));
        points.dedup_by(|a, b| a.system == b.system && a.snr_db == b.snr_db);
        Self {
            scenario: cfg.name.clone(),
            csi_mode: cfg.csi_mode,
            base_seed: cfg.base_seed,
            trials: trials.len(),
            points,
        }
    }

    pub fn point(&self, system: System, snr_db: f64) -> Option<&AggregatePoint> {
        self.points.iter().find(|p| p.system == system && p.snr_db == snr_db)
    }
}

/// Runs all trials on `threads` worker threads (`None`: rayon's default).
/// Results are returned in trial order.
pub fn run_trials(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<Vec<TrialResult>, SimError> {
    cfg.validate().map_err(SimError::Config)?;
    let work = || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<Vec<_>, _>>()
    };
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(work),
        None => work(),
    }
}

pub fn run_campaign(cfg: &ScenarioConfig) -> Result<AggregateResult, SimError> {
    run_campaign_with_threads(cfg, None)
}

pub fn run_campaign_with_threads(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<AggregateResult, SimError> {
    let trials = run_trials(cfg, threads)?;
    Ok(AggregateResult::from_trials(cfg, &trials))
}
