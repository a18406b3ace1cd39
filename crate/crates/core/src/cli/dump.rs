//! Magnitude dumps of the matrices behind one trial, for external plotting.
//!
//! Matrix files hold `|a_nm|` with a header `n/m,0,1,...` and one row per `n`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use faer::{c64, MatRef};

use crate::channel::{sample_channel, spreading_function};
use crate::montecarlo::{trial_basis, trial_channel, ScenarioConfig, SimError};
use crate::receiver::{channel_eigenvalues, mmse_filter, sinr_per_dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    /// `|H(t,f)|` and the spreading function.
    H,
    /// `|U|` for every scheme.
    U,
    /// `|H_c|` per scheme and SNR, plus the diagonals of `H` and `H_c`.
    Hc,
    /// Per-dimension SINR per scheme and SNR.
    Sinr,
}

impl FromStr for DumpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H" => Ok(DumpKind::H),
            "U" => Ok(DumpKind::U),
            "Hc" => Ok(DumpKind::Hc),
            "sinr" => Ok(DumpKind::Sinr),
            other => Err(format!("unknown dump `{other}` (expected H, U, Hc or sinr)")),
        }
    }
}

pub fn magnitude_csv(m: MatRef<'_, c64>) -> String {
    let mut s = String::from("n/m");
    for j in 0..m.ncols() {
        write!(s, ",{j}").unwrap();
    }
    s.push('\n');
    for i in 0..m.nrows() {
        write!(s, "{i}").unwrap();
        for j in 0..m.ncols() {
            write!(s, ",{}", super::output::fmt_g9(m[(i, j)].norm())).unwrap();
        }
        s.push('\n');
    }
    s
}

fn columns_csv(names: &[String], cols: &[Vec<f64>]) -> String {
    let mut s = String::from("n");
    for name in names {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    let rows = cols.first().map_or(0, Vec::len);
    for i in 0..rows {
        write!(s, "{i}").unwrap();
        for c in cols {
            write!(s, ",{}", super::output::fmt_g9(c[i])).unwrap();
        }
        s.push('\n');
    }
    s
}

fn snr_tag(db: f64) -> String {
    format!("{}dB", super::output::fmt_g9(db))
}

/// Output path `<prefix>.<suffix>.csv`.
pub fn dump_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{suffix}.csv"));
    PathBuf::from(s)
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Writes the requested dump for `trial` and returns the files written.
pub fn dump(cfg: &ScenarioConfig, kind: DumpKind, trial: usize, prefix: &Path) -> Result<Vec<PathBuf>, DumpError> {
    cfg.validate().map_err(SimError::Config)?;
    let grid = cfg.grid().map_err(SimError::from)?;
    let sc = sample_channel(&trial_channel(cfg, trial), &grid);
    let mut files: Vec<(String, String)> = Vec::new();
    let numerical = |system| {
        move |source| SimError::Numerical {
            trial,
            system,
            source,
        }
    };

    match kind {
        DumpKind::H => {
            files.push(("H".into(), magnitude_csv(sc.h.as_ref())));
            files.push(("spreading".into(), magnitude_csv(spreading_function(&sc).as_ref())));
        }
        DumpKind::U => {
            for system in &cfg.systems {
                if let Some(scheme) = system.scheme() {
                    let basis = trial_basis(cfg, &grid, scheme, trial);
                    files.push((format!("U_{system}"), magnitude_csv(basis.matrix().as_ref())));
                }
            }
        }
        DumpKind::Hc | DumpKind::Sinr => {
            let g = sc.time_domain();
            let mut names = Vec::new();
            let mut cols = Vec::new();
            for &system in &cfg.systems {
                match system.scheme() {
                    Some(scheme) => {
                        let h = trial_basis(cfg, &grid, scheme, trial).conjugate(g.as_ref());
                        if kind == DumpKind::Hc {
                            names.push(format!("{system}_H"));
                            cols.push((0..h.nrows()).map(|n| h[(n, n)].norm()).collect());
                        }
                        for &db in &cfg.snr_points_db {
                            let snr = 10f64.powf(db / 10.0);
                            let rs = mmse_filter(h.clone(), snr, cfg.csi_mode).map_err(numerical(system))?;
                            if kind == DumpKind::Hc {
                                let c = &rs.composite;
                                names.push(format!("{system}_Hc_{}", snr_tag(db)));
                                cols.push((0..c.nrows()).map(|n| c[(n, n)].norm()).collect());
                                files.push((format!("Hc_{system}_{}", snr_tag(db)), magnitude_csv(c.as_ref())));
                            } else {
                                names.push(format!("{system}_{}", snr_tag(db)));
                                cols.push(sinr_per_dimension(&rs));
                            }
                        }
                    }
                    None if kind == DumpKind::Sinr => {
                        let lambda = channel_eigenvalues(g.as_ref()).map_err(numerical(system))?;
                        for &db in &cfg.snr_points_db {
                            let snr = 10f64.powf(db / 10.0);
                            names.push(format!("{system}_{}", snr_tag(db)));
                            cols.push(lambda.iter().map(|l| snr * l).collect());
                        }
                    }
                    None => {}
                }
            }
            let name = if kind == DumpKind::Hc { "diag" } else { "sinr" };
            files.push((name.into(), columns_csv(&names, &cols)));
        }
    }

    let mut written = Vec::with_capacity(files.len());
    for (suffix, body) in files {
        let path = dump_path(prefix, &suffix);
        std::fs::write(&path, body).map_err(|source| DumpError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
