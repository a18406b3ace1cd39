//! CSV results and run metadata.

use std::io::{self, Write};

use crate::montecarlo::{AggregateResult, ScenarioConfig};

pub const CSV_HEADER: &str = "scenario,scheme,csi_mode,snr_db,trials,mean_capacity_bps_hz,mean_gamma_H_db,mean_gamma_Hc_db,ser,ser_ci_lo,ser_ci_hi,ber,seed";

/// One CSV line: a (scheme, SNR) point of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub scenario: String,
    pub scheme: String,
    pub csi_mode: String,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_capacity_bps_hz: f64,
    pub mean_gamma_h_db: f64,
    pub mean_gamma_hc_db: f64,
    pub ser: f64,
    pub ser_ci_lo: f64,
    pub ser_ci_hi: f64,
    pub ber: f64,
    pub seed: u64,
}

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Rows in aggregate order: scheme name, then ascending SNR.
pub fn rows(agg: &AggregateResult) -> Vec<OutputRow> {
    agg.points
        .iter()
        .map(|p| {
            let (lo, hi) = p.ser_interval();
            OutputRow {
                scenario: agg.scenario.clone(),
                scheme: p.system.to_string(),
                csi_mode: agg.csi_mode.to_string(),
                snr_db: p.snr_db,
                trials: p.trials,
                mean_capacity_bps_hz: p.mean_capacity,
                mean_gamma_h_db: to_db(p.mean_gamma_h),
                mean_gamma_hc_db: to_db(p.mean_gamma_hc),
                ser: p.ser(),
                ser_ci_lo: lo,
                ser_ci_hi: hi,
                ber: p.ber(),
                seed: agg.base_seed,
            }
        })
        .collect()
}

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    const PREC: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // round to 9 significant digits first; the exponent is the rounded one
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..PREC).contains(&exp) {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(mut w: W, rows: &[OutputRow]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.scenario),
            r.scheme,
            r.csi_mode,
            fmt_g9(r.snr_db),
            r.trials,
            fmt_g9(r.mean_capacity_bps_hz),
            fmt_g9(r.mean_gamma_h_db),
            fmt_g9(r.mean_gamma_hc_db),
            fmt_g9(r.ser),
            fmt_g9(r.ser_ci_lo),
            fmt_g9(r.ser_ci_hi),
            fmt_g9(r.ber),
            r.seed,
        )?;
    }
    Ok(())
}

pub fn csv_string(agg: &AggregateResult) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows(agg)).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Sidecar metadata: version, resolved configuration and seed derivation.
pub fn metadata(cfg: &ScenarioConfig, threads: Option<usize>, channel_seeds: &[u64]) -> String {
    let mut t = toml::Table::new();
    t.insert("version".into(), concat!("ddsig ", env!("CARGO_PKG_VERSION")).into());
    for (k, v) in super::config::to_table(cfg, threads) {
        t.insert(k, v);
    }
    let mut seeds = toml::Table::new();
    seeds.insert("base_seed".into(), cfg.base_seed.to_string().into());
    seeds.insert(
        "derivation".into(),
        "splitmix64 chain over (base_seed, trial, stream, index); streams: channel=1, precoder=2, symbols=3, noise=4; index = SNR position for symbols and noise".into(),
    );
    seeds.insert(
        "channel".into(),
        toml::Value::Array(channel_seeds.iter().map(|s| s.to_string().into()).collect()),
    );
    t.insert("seeds".into(), toml::Value::Table(seeds));
    let mut notes = toml::Table::new();
    notes.insert(
        "eig_error_rate".into(),
        "eig rows use 4-QAM detection on independent eigenchannels with SINR = snr * lambda_n".into(),
    );
    notes.insert("gamma".into(), "gamma is averaged over trials in linear scale, then converted to dB".into());
    t.insert("notes".into(), toml::Value::Table(notes));
    t.to_string()
}
