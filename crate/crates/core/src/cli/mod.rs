//! Command-line front end.
//!
//! Configuration precedence: built-in scenario, then `--config` file, then
//! individual flags.

pub mod config;
pub mod dump;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::montecarlo::{derive_seed, run_trials, stream, AggregateResult, SimError};
use crate::receiver::CsiMode;
use config::ConfigError;
use dump::{DumpError, DumpKind};

/// Exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const UNKNOWN_NAME: i32 = 3;
    pub const CONFIG_UNREADABLE: i32 = 4;
    pub const CONFIG_INVALID: i32 = 5;
    pub const OUTPUT: i32 = 6;
    pub const NUMERICAL: i32 = 7;
}

#[derive(Debug, Parser)]
#[command(name = "ddsig", version, about = "Monte Carlo link simulation of OSTF, OTFS, OFDM and OSTF-U over doubly dispersive channels")]
pub struct Args {
    /// Built-in scenario: moderate or extreme.
    #[arg(long)]
    pub scenario: Option<String>,
    /// TOML scenario file merged over the built-in scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated systems: ostf, otfs, ofdm, ostf-u, eig.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Receiver channel knowledge.
    #[arg(long, value_parser = ["full", "diag"])]
    pub csi: Option<String>,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "DDSIG_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Results CSV; dumps use it as a file prefix.
    #[arg(long, default_value = "ddsig_results.csv")]
    pub out: PathBuf,
    /// Write matrices of one trial instead of running a campaign.
    #[arg(long, value_parser = ["H", "U", "Hc", "sinr"])]
    pub dump: Option<String>,
    /// Trial used by --dump.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::UnknownScenario(_) | ConfigError::UnknownScheme(_)) => exit::UNKNOWN_NAME,
            CliError::Config(ConfigError::Read { .. }) => exit::CONFIG_UNREADABLE,
            CliError::Config(ConfigError::Invalid(_)) | CliError::Sim(SimError::Config(_) | SimError::Grid(_)) => {
                exit::CONFIG_INVALID
            }
            CliError::Sim(_) => exit::NUMERICAL,
            CliError::Output { .. } => exit::OUTPUT,
        }
    }
}

impl From<DumpError> for CliError {
    fn from(e: DumpError) -> Self {
        match e {
            DumpError::Sim(s) => CliError::Sim(s),
            DumpError::Write { path, source } => CliError::Output { path, source },
        }
    }
}

/// Applies built-in, file and flag settings in that order.
pub fn resolve(args: &Args) -> Result<config::ResolvedConfig, CliError> {
    let mut resolved = match &args.config {
        Some(path) => config::load_config(path, args.scenario.as_deref())?,
        None => config::ResolvedConfig {
            scenario: config::builtin(args.scenario.as_deref().unwrap_or("moderate"))?,
            threads: None,
        },
    };
    let cfg = &mut resolved.scenario;
    if let Some(s) = &args.schemes {
        cfg.systems = config::parse_schemes(s)?;
    }
    if let Some(c) = &args.csi {
        cfg.csi_mode = c.parse::<CsiMode>().expect("restricted by clap");
    }
    if let Some(snr) = &args.snr {
        cfg.snr_points_db = snr.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(k) = args.threads {
        resolved.threads = Some(k as usize);
    }
    resolved
        .scenario
        .validate()
        .map_err(|e| CliError::Config(ConfigError::Invalid(e)))?;
    Ok(resolved)
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// `<out>.meta.toml`.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

fn log_points(agg: &AggregateResult, err: &mut dyn Write) {
    let mut snrs: Vec<f64> = agg.points.iter().map(|p| p.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    for snr in snrs {
        let mut line = format!("{} {} snr={} dB:", agg.scenario, agg.csi_mode, output::fmt_g9(snr));
        for p in agg.points.iter().filter(|p| p.snr_db == snr) {
            line.push_str(&format!(" {} C={:.3} SER={:.3e}", p.system, p.mean_capacity, p.ser()));
        }
        let _ = writeln!(err, "{line}");
    }
}

/// Runs the command and returns the process exit status.
pub fn run(args: &Args, err: &mut dyn Write) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    let cfg = &resolved.scenario;

    if let Some(kind) = &args.dump {
        let kind: DumpKind = kind.parse().expect("restricted by clap");
        let prefix = args.out.with_extension("");
        for path in dump::dump(cfg, kind, args.trial, &prefix)? {
            let _ = writeln!(err, "wrote {}", path.display());
        }
        return Ok(());
    }

    let grid = cfg.grid().map_err(SimError::from)?;
    let _ = writeln!(
        err,
        "{}: N_t={} N_f={} N={} trials={} csi={}",
        cfg.name, grid.n_t, grid.n_f, grid.n, cfg.trials, cfg.csi_mode
    );
    let trials = run_trials(cfg, resolved.threads)?;
    let agg = AggregateResult::from_trials(cfg, &trials);
    log_points(&agg, err);

    let channel_seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|t| derive_seed(cfg.base_seed, t, stream::CHANNEL, 0))
        .collect();
    write_file(&args.out, &output::csv_string(&agg))?;
    write_file(&meta_path(&args.out), &output::metadata(cfg, resolved.threads, &channel_seeds))?;
    let _ = writeln!(err, "wrote {}", args.out.display());
    Ok(())
}

/// Parses `argv`, runs, reports errors on stderr and returns the exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let mut stderr = std::io::stderr();
    match run(&args, &mut stderr) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
