//! Machine-readable artifacts: deficit report JSON, exponent-scan CSV,
//! R_t curve CSV, and the config echo embedded in every output so any
//! file can be reproduced bit-exactly from its own header.

use crate::robustness::{ScanResult, ScanRow};
use crate::stability::{RtCurve, StabilityReport};
use serde::Serialize;
use std::fmt::Write as _;

/// The configuration echoed into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub command: String,
    pub corpus: Option<String>,
    pub rho: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub format: String,
}

/// Full deficit report over a corpus sweep: config echo plus one entry
/// per (f, g, ρ) in deterministic order.
#[derive(Debug, Clone, Serialize)]
pub struct BorellReport {
    pub config: ConfigEcho,
    pub results: Vec<BorellEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BorellEntry {
    pub f: String,
    pub g: String,
    #[serde(flatten)]
    pub report: StabilityReport,
    /// margin in standard errors: delta / delta_se (f64::INFINITY when
    /// the estimate is exact).
    pub sigma_margin: f64,
}

pub fn borell_entry(f: &str, g: &str, report: StabilityReport) -> BorellEntry {
    // se == 0 means the per-sample value was constant, i.e. the row is exact
    // up to the ~1e-12 tolerance of the two K quadratures
    let sigma_margin = if report.delta_se > 0.0 {
        report.delta / report.delta_se
    } else if report.delta >= -1e-9 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    BorellEntry {
        f: f.to_string(),
        g: g.to_string(),
        report,
        sigma_margin,
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Exponent-scan CSV with the fixed schema
/// `size,dist_L1,dist_se,delta,delta_se,rho,family,seed`.
/// Rows with an unresolvable deficit are kept (never silently dropped);
/// the flags live in the accompanying config echo via `dropped_sizes`.
pub fn scan_csv(scan: &ScanResult, seed: u64) -> String {
    let family = match scan.family {
        crate::robustness::ScanFamily::ShiftedHalfspace => "shifted-halfspace",
        crate::robustness::ScanFamily::Wedge => "wedge",
        crate::robustness::ScanFamily::Strip => "strip",
    };
    let mut out = String::from("size,dist_L1,dist_se,delta,delta_se,rho,family,seed\n");
    for r in &scan.rows {
        let ScanRow {
            size,
            dist_l1,
            dist_se,
            delta,
            delta_se,
            ..
        } = r;
        writeln!(
            out,
            "{size},{dist_l1},{dist_se},{delta},{delta_se},{},{family},{seed}",
            scan.rho
        )
        .unwrap();
    }
    out
}

/// Sidecar JSON for a scan: config echo, slope, calibration constants,
/// and explicit flags for rows whose deficit could not be resolved.
#[derive(Debug, Clone, Serialize)]
pub struct ScanEcho {
    pub config: ConfigEcho,
    pub family: String,
    pub fitted_slope: Option<f64>,
    pub theoretical_exponent: f64,
    pub c_values: Vec<f64>,
    pub dropped_sizes: Vec<f64>,
}

pub fn scan_echo(scan: &ScanResult, config: ConfigEcho) -> ScanEcho {
    let family = match scan.family {
        crate::robustness::ScanFamily::ShiftedHalfspace => "shifted-halfspace",
        crate::robustness::ScanFamily::Wedge => "wedge",
        crate::robustness::ScanFamily::Strip => "strip",
    }
    .to_string();
    ScanEcho {
        config,
        family,
        fitted_slope: scan.fitted_slope,
        theoretical_exponent: scan.theoretical_exponent,
        c_values: scan.c_values.clone(),
        dropped_sizes: scan
            .rows
            .iter()
            .filter(|r| r.dropped)
            .map(|r| r.size)
            .collect(),
    }
}

/// R_t curve CSV: `t,value,std_error,rho,f,g,seed`.
pub fn rt_csv(curve: &RtCurve, rho: f64, f: &str, g: &str, seed: u64) -> String {
    let mut out = String::from("t,value,std_error,rho,f,g,seed\n");
    for ((t, v), se) in curve.grid.iter().zip(&curve.values).zip(&curve.std_errors) {
        writeln!(out, "{t},{v},{se},{rho},{f},{g},{seed}").unwrap();
    }
    out
}
