//! Command-line front end: single evaluations, verification suites, and
//! scans. Exit codes: 0 pass, 1 assertion failure, 2 usage/config error.

use crate::corpus::{default_corpus, Corpus};
use crate::report::{
    borell_entry, rt_csv, scan_csv, scan_echo, to_json_pretty, BorellReport, ConfigEcho,
};
use crate::robustness::{
    self, change_rho_check, exponent_scan, fit_halfspace, halfspace_cross_stability,
    halfspace_cross_stability_deriv, poincare_fit, time_reversal_bound, FitObjective, ScanFamily,
};
use crate::sampling::GaussianPairStream;
use crate::stability::{deficit, gauss_mean, rt_curve};
use clap::{Parser, Subcommand, ValueEnum};
use gauss_stab_core::hermite::{enumerate_multi_indices, hermite_transform, poincare_exact};
use gauss_stab_core::semigroup::{Method, Semigroup, TestFunction, TimeParam};
use gauss_stab_core::{
    gauss_isoperimetric_i, joint_quantile_prob, norm_cdf, norm_quantile, Correlation,
};
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gauss-stab",
    version,
    about = "Numerical laboratory for Gaussian noise stability"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// RNG seed (env GAUSS_STAB_SEED; this flag wins).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results are identical for any value).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sample budget; scientific notation accepted (e.g. 1e6).
    #[arg(long, global = true)]
    pub samples: Option<String>,
    /// Corpus JSON path (defaults to the built-in 12-member corpus).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory for report/CSV artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Artifact format for verify reports.
    #[arg(long, global = true, default_value = "json")]
    pub format: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a single closed-form or quadrature value.
    Eval {
        what: EvalWhat,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
    },
    /// Run a verification suite; exit 0 iff every assertion passes.
    Verify {
        suite: Suite,
        /// Correlation(s), comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rho: Vec<f64>,
        /// Smoothing time(s), comma separated.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Change-of-ρ multiplier k.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Write scan CSVs (R_t curve or deficit-exponent sweep).
    Scan {
        kind: ScanKind,
        /// Family for exponent scans.
        #[arg(long)]
        family: Option<FamilyArg>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        /// Sizes for exponent scans, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<f64>,
        /// Corpus pair "f-id,g-id" for R_t scans (alias: halfspace-pair).
        #[arg(long)]
        pair: Option<String>,
        /// t grid for R_t scans, comma separated.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
    },
    /// Measure the empirical constants (time-reversal C, exponent C) and
    /// print a calibration table with a 1.5x safety margin.
    Calibrate,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum EvalWhat {
    J,
    K,
    Phi,
    PhiInv,
    Isoperimetric,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Suite {
    Borell,
    Equality,
    Poincare,
    TimeReversal,
    ChangeRho,
    Hermite,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScanKind {
    Rt,
    Exponent,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FamilyArg {
    ShiftedHalfspace,
    Wedge,
    Strip,
}

impl From<FamilyArg> for ScanFamily {
    fn from(f: FamilyArg) -> ScanFamily {
        match f {
            FamilyArg::ShiftedHalfspace => ScanFamily::ShiftedHalfspace,
            FamilyArg::Wedge => ScanFamily::Wedge,
            FamilyArg::Strip => ScanFamily::Strip,
        }
    }
}

/// One line per check; `pass` drives the exit code.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub sigma_margin: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, value: f64, bound: f64, se: f64) -> Check {
    // value must not exceed bound by more than 3σ (σ=0 means exact)
    let excess = value - bound;
    let sigma_margin = if se > 0.0 {
        excess / se
    } else if excess <= 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    Check {
        name: name.into(),
        value,
        bound,
        sigma_margin,
        pass: excess <= 3.0 * se || excess <= 1e-9,
    }
}

pub struct Resolved {
    pub seed: u64,
    pub samples: u64,
    pub corpus: Corpus,
    pub out: Option<PathBuf>,
    pub format: String,
}

fn parse_samples(s: &str) -> Result<u64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("invalid sample count {s:?}"))?;
    if !(v >= 2.0 && v.is_finite() && v <= 1e12) {
        return Err(format!("sample count {s:?} out of range"));
    }
    Ok(v as u64)
}

impl Cli {
    fn resolve(&self, default_samples: u64) -> Result<Resolved, String> {
        let seed = match self.seed {
            Some(s) => s,
            None => match std::env::var("GAUSS_STAB_SEED") {
                Ok(v) => v.parse().map_err(|_| "invalid GAUSS_STAB_SEED")?,
                Err(_) => 42,
            },
        };
        let samples = match &self.samples {
            Some(s) => parse_samples(s)?,
            None => default_samples,
        };
        let corpus = match &self.corpus {
            Some(p) => Corpus::load(p).map_err(|e| format!("corpus: {e}"))?,
            None => default_corpus(),
        };
        if let Some(t) = self.threads {
            // ignore failure if a pool exists already (e.g. under tests)
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
        if self.format != "json" && self.format != "csv" {
            return Err(format!("unknown format {:?}", self.format));
        }
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| format!("out dir: {e}"))?;
        }
        Ok(Resolved {
            seed,
            samples,
            corpus: corpus.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
        })
    }
}

fn echo(cfg: &Resolved, command: &str, rho: &[f64], t: &[f64]) -> ConfigEcho {
    ConfigEcho {
        command: command.to_string(),
        corpus: None,
        rho: rho.to_vec(),
        t_grid: t.to_vec(),
        samples: cfg.samples,
        seed: cfg.seed,
        format: cfg.format.clone(),
    }
}

fn write_artifact(cfg: &Resolved, name: &str, text: &str) -> Result<(), String> {
    if let Some(dir) = &cfg.out {
        std::fs::write(dir.join(name), text).map_err(|e| format!("write {name}: {e}"))?;
    }
    Ok(())
}

fn emit(checks: &[Check], suite: &str, cfg: &Resolved) -> Result<i32, String> {
    let mut all = true;
    for c in checks {
        all &= c.pass;
        println!(
            "[{}] {suite}: {} (value {:.6e}, bound {:.6e}, margin {:+.2}σ)",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.bound,
            c.sigma_margin
        );
    }
    #[derive(serde::Serialize)]
    struct Report<'a> {
        suite: &'a str,
        seed: u64,
        samples: u64,
        checks: &'a [Check],
        pass: bool,
    }
    let report = to_json_pretty(&Report {
        suite,
        seed: cfg.seed,
        samples: cfg.samples,
        checks,
        pass: all,
    });
    write_artifact(cfg, &format!("verify-{suite}.json"), &report)?;
    Ok(if all { EXIT_PASS } else { EXIT_FAIL })
}

/// Full CLI entry point; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, String> {
    match &cli.command {
        Command::Eval { what, x, y, rho } => {
            let cfg = cli.resolve(1_000_000)?;
            let _ = cfg;
            let value = match what {
                EvalWhat::J => {
                    let r = Correlation::new(rho.ok_or("eval j needs --rho")?)
                        .map_err(|e| e.to_string())?;
                    joint_quantile_prob(*x, y.ok_or("eval j needs --y")?, r)
                        .map_err(|e| e.to_string())?
                }
                EvalWhat::K => {
                    let r = Correlation::new(rho.unwrap_or(0.0)).map_err(|e| e.to_string())?;
                    gauss_stab_core::bvn_k(*x, y.ok_or("eval k needs --y")?, r)
                        .map_err(|e| e.to_string())?
                }
                EvalWhat::Phi => norm_cdf(*x),
                EvalWhat::PhiInv => norm_quantile(*x).map_err(|e| e.to_string())?,
                EvalWhat::Isoperimetric => gauss_isoperimetric_i(*x).map_err(|e| e.to_string())?,
            };
            println!("{value:.12}");
            Ok(EXIT_PASS)
        }
        Command::Verify { suite, rho, t, k } => match suite {
            Suite::Borell => verify_borell(cli, rho),
            Suite::Equality => verify_equality(cli, rho),
            Suite::Poincare => verify_poincare(cli, rho, t),
            Suite::TimeReversal => verify_time_reversal(cli, t),
            Suite::ChangeRho => verify_change_rho(cli, rho, k.unwrap_or(2)),
            Suite::Hermite => verify_hermite(cli),
        },
        Command::Scan {
            kind,
            family,
            rho,
            sizes,
            pair,
            t,
        } => match kind {
            ScanKind::Rt => scan_rt(cli, pair.as_deref(), rho.unwrap_or(0.5), t),
            ScanKind::Exponent => scan_exponent(
                cli,
                ScanFamily::from(family.ok_or("scan exponent needs --family")?),
                rho.unwrap_or(0.9),
                sizes,
            ),
        },
        Command::Calibrate => calibrate(cli),
    }
}

fn corpus_functions(corpus: &Corpus) -> Result<Vec<(String, TestFunction)>, String> {
    corpus
        .members
        .iter()
        .map(|m| {
            m.to_test_function()
                .map(|f| (m.id.clone(), f))
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn verify_borell(cli: &Cli, rho: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(1_000_000)?;
    let rhos = if rho.is_empty() { vec![0.5] } else { rho.to_vec() };
    let fns = corpus_functions(&cfg.corpus)?;
    let stream = GaussianPairStream::new(2, Correlation::new(0.0).unwrap(), cfg.seed, 0);
    let mut checks = Vec::new();
    let mut entries = Vec::new();
    for &r in &rhos {
        let rr = Correlation::new(r).map_err(|e| e.to_string())?;
        for (i, (fid, f)) in fns.iter().enumerate() {
            for (j, (gid, g)) in fns.iter().enumerate() {
                let sub = stream.substream((i * fns.len() + j) as u64);
                let rep = deficit(f, g, rr, &sub, cfg.samples, &[fid, gid])
                    .map_err(|e| e.to_string())?;
                // assertion: δ ≥ -3σ, i.e. -δ ≤ 3σ
                checks.push(check(
                    format!("delta({fid},{gid};rho={r}) >= -3se"),
                    -rep.delta,
                    0.0,
                    rep.delta_se,
                ));
                entries.push(borell_entry(fid, gid, rep));
            }
        }
    }
    let report = BorellReport {
        config: echo(&cfg, "verify borell", &rhos, &[]),
        results: entries,
    };
    write_artifact(&cfg, "borell.json", &to_json_pretty(&report))?;
    emit(&checks, "borell", &cfg)
}

fn verify_equality(cli: &Cli, rho: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(400_000)?;
    let r = Correlation::new(*rho.first().unwrap_or(&0.5)).map_err(|e| e.to_string())?;
    let fns = corpus_functions(&cfg.corpus)?;
    let stream = GaussianPairStream::new(2, r, cfg.seed, 50);
    let sg = Semigroup::new(64);
    let mut checks = Vec::new();
    for (i, (id, f)) in fns.iter().enumerate() {
        let sub = stream.substream(i as u64);
        let rep = deficit(f, f, r, &sub, cfg.samples, &[id]).map_err(|e| e.to_string())?;
        let is_equality_kind = matches!(
            f,
            TestFunction::HalfSpaceInd(_)
                | TestFunction::LinearThreshold { .. }
                | TestFunction::Constant { .. }
        );
        if is_equality_kind {
            checks.push(check(
                format!("{id}: |delta| ~ 0"),
                rep.delta.abs(),
                0.0,
                rep.delta_se,
            ));
            if !matches!(f, TestFunction::Constant { .. }) {
                let fit = fit_halfspace(f, FitObjective::Smooth, &sg, &sub, cfg.samples / 4)
                    .map_err(|e| e.to_string())?;
                checks.push(check(
                    format!("{id}: threshold fit distance ~ 0"),
                    fit.dist,
                    0.0,
                    // generous: optimizer tolerance dominates the MC error
                    fit.dist_se + 2e-3 / 3.0,
                ));
            }
        } else {
            // genuinely non-optimal sets must show a resolved deficit
            let mut c = check(
                format!("{id}: delta > 3se away from 0"),
                3.0 * rep.delta_se,
                rep.delta,
                0.0,
            );
            c.pass = rep.delta > 3.0 * rep.delta_se;
            checks.push(c);
        }
    }
    emit(&checks, "equality", &cfg)
}

fn verify_poincare(cli: &Cli, rho: &[f64], t: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(200_000)?;
    let r = Correlation::new(*rho.first().unwrap_or(&0.5)).map_err(|e| e.to_string())?;
    let mut checks = Vec::new();
    // exact oracle on random low-degree polynomials
    let mut state = cfg.seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for case in 0..20 {
        let dim = 1 + (case % 2);
        let deg = 2 + (case % 3) as u32;
        let mut v = gauss_stab_core::HermiteExpansion::new(dim, deg);
        let mut w = gauss_stab_core::HermiteExpansion::new(dim, deg);
        for alpha in enumerate_multi_indices(dim, deg) {
            v.set_coeff(alpha.clone(), next());
            w.set_coeff(alpha, next());
        }
        let (ev, ew, rhs, _a) = poincare_exact(&v, &w, r).map_err(|e| e.to_string())?;
        checks.push(check(format!("random poly {case}: lhs <= rhs"), ev + ew, rhs + 1e-9, 0.0));
    }
    // quadratic equality case, exact and by MC through the fit machinery
    let mut q = gauss_stab_core::HermiteExpansion::new(1, 2);
    q.set_coeff(gauss_stab_core::MultiIndex(vec![1]), 0.7);
    q.set_coeff(gauss_stab_core::MultiIndex(vec![2]), 1.3);
    let mut q7 = q.clone();
    q7.set_coeff(gauss_stab_core::MultiIndex(vec![0]), 7.0);
    let (ev, ew, rhs, _) = poincare_exact(&q, &q7, r).map_err(|e| e.to_string())?;
    checks.push(check("quadratic equality: |lhs - rhs| = 0", (ev + ew - rhs).abs(), 0.0, 1e-12));
    // MC version of the inequality for smoothed corpus functions
    let sg = Semigroup::new(64);
    let tt = TimeParam::new(*t.first().unwrap_or(&0.5)).map_err(|e| e.to_string())?;
    let stream = GaussianPairStream::new(2, r, cfg.seed, 60);
    let f = robustness::origin_halfspace();
    let g = ScanFamily::Wedge.member(0.3);
    let fit = poincare_fit(&f, &g, r, tt, &sg, &stream, cfg.samples).map_err(|e| e.to_string())?;
    checks.push(check(
        "smoothed halfspace/wedge: lhs <= rhs",
        fit.lhs,
        fit.rhs,
        (fit.lhs_se * fit.lhs_se + fit.rhs_se * fit.rhs_se).sqrt(),
    ));
    emit(&checks, "poincare", &cfg)
}

/// Calibrated constant for the time-reversal envelope; measured by
/// `calibrate` (max observed ratio × 1.5 margin).
pub const TIME_REVERSAL_C: f64 = 3.0;
/// Calibrated constant for the exponent bound dist ≤ C(δ/√(1-ρ))^{1/4};
/// measured by `calibrate` on the wedge family at ρ = 0.9.
pub const EXPONENT_C: f64 = 2.0;

fn verify_time_reversal(cli: &Cli, t: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(400_000)?;
    let ts = if t.is_empty() {
        vec![0.25, 0.5, 1.0]
    } else {
        t.to_vec()
    };
    let sg = Semigroup::new(64);
    let stream = GaussianPairStream::new(2, Correlation::new(0.0).unwrap(), cfg.seed, 70);
    let wedge = ScanFamily::Wedge.member(0.3);
    let fit = fit_halfspace(&wedge, FitObjective::Sharp, &sg, &stream, cfg.samples)
        .map_err(|e| e.to_string())?;
    let best = TestFunction::HalfSpaceInd(gauss_stab_core::HalfSpace::new(
        fit.a.clone(),
        fit.b,
        gauss_stab_core::Orientation::Le,
    ));
    let mut checks = Vec::new();
    for &tv in &ts {
        let tp = TimeParam::new(tv).map_err(|e| e.to_string())?;
        let tr = time_reversal_bound(&wedge, &best, tp, &sg, &stream.substream(tv.to_bits()), cfg.samples)
            .map_err(|e| e.to_string())?;
        checks.push(check(
            format!("t={tv}: sym_diff <= C * envelope"),
            tr.sym_diff,
            TIME_REVERSAL_C * tr.envelope,
            tr.sym_diff_se,
        ));
    }
    emit(&checks, "time-reversal", &cfg)
}

fn verify_change_rho(cli: &Cli, rho: &[f64], k: u32) -> Result<i32, String> {
    let cfg = cli.resolve(1_000_000)?;
    let r = *rho.first().unwrap_or(&0.9);
    let rr = Correlation::new(r).map_err(|e| e.to_string())?;
    let stream = GaussianPairStream::new(2, rr, cfg.seed, 80);
    let mut checks = Vec::new();
    // equality row: half-space of measure ½
    let hs = robustness::origin_halfspace();
    let eq = change_rho_check(&hs, rr, k, &stream, cfg.samples).map_err(|e| e.to_string())?;
    let exact = robustness::halfspace_cross_mass(eq.theta);
    checks.push(check(
        format!("halfspace lhs matches arccos value (rho={r}, k={k})"),
        (eq.lhs - exact).abs(),
        0.0,
        eq.lhs_se,
    ));
    checks.push(check(
        format!("halfspace lhs <= k*rhs (rho={r}, k={k})"),
        eq.lhs,
        eq.rhs,
        (eq.lhs_se * eq.lhs_se + eq.rhs_se * eq.rhs_se).sqrt(),
    ));
    // inequality rows: the wedge
    let wedge = ScanFamily::Wedge.member(0.3);
    let wr = change_rho_check(&wedge, rr, k, &stream.substream(1), cfg.samples)
        .map_err(|e| e.to_string())?;
    checks.push(check(
        format!("wedge lhs <= k*rhs (rho={r}, k={k})"),
        wr.lhs,
        wr.rhs,
        (wr.lhs_se * wr.lhs_se + wr.rhs_se * wr.rhs_se).sqrt(),
    ));
    emit(&checks, "change-rho", &cfg)
}

fn verify_hermite(cli: &Cli) -> Result<i32, String> {
    let cfg = cli.resolve(0)?;
    let mut checks = Vec::new();
    // orthonormality under tensor Gauss-Hermite quadrature (dim 2, deg 3)
    let (nodes, weights) = gauss_stab_core::quad::gauss_hermite(8);
    let idxs = enumerate_multi_indices(2, 3);
    let mut worst = 0.0f64;
    for a in &idxs {
        for b in &idxs {
            let mut acc = 0.0;
            for (i, &xi) in nodes.iter().enumerate() {
                for (j, &xj) in nodes.iter().enumerate() {
                    let p = [xi, xj];
                    let ha = gauss_stab_core::hermite::hermite_eval(a, &p).unwrap();
                    let hb = gauss_stab_core::hermite::hermite_eval(b, &p).unwrap();
                    acc += weights[i] * weights[j] * ha * hb;
                }
            }
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((acc - want).abs());
        }
    }
    checks.push(check("orthonormality (dim 2, deg <= 3)", worst, 0.0, 1e-10 / 3.0));
    // P_t by coefficients vs P_t by quadrature on a generic expansion
    let e = hermite_transform(|x| (0.3 * x[0] + 0.1 * x[1] * x[1]).sin(), 2, 8)
        .map_err(|e| e.to_string())?;
    let f = TestFunction::Hermite(e.clone());
    let sg = Semigroup::new(64);
    let t = TimeParam::new(0.4).map_err(|e| e.to_string())?;
    let spectral = e.apply_p_t(0.4);
    let mut worst = 0.0f64;
    for &x in &[-1.2, 0.0, 0.7] {
        for &y in &[-0.4, 1.1] {
            let p = [x, y];
            let via_coeffs = spectral.eval(&p).map_err(|e| e.to_string())?;
            let via_quad = sg
                .p_t(&f, t, &p, Method::Quadrature)
                .map_err(|e| e.to_string())?;
            worst = worst.max((via_coeffs - via_quad).abs());
        }
    }
    checks.push(check("T_rho/P_t agreement", worst, 0.0, 1e-8 / 3.0));
    emit(&checks, "hermite", &cfg)
}

fn scan_rt(cli: &Cli, pair: Option<&str>, rho: f64, t: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(200_000)?;
    let r = Correlation::new(rho).map_err(|e| e.to_string())?;
    let (fid, gid) = match pair {
        None | Some("halfspace-pair") => ("halfspace-origin", "halfspace-origin"),
        Some(p) => p
            .split_once(',')
            .ok_or("pair must be \"f-id,g-id\" or halfspace-pair")?,
    };
    let f = cfg
        .corpus
        .get(fid)
        .map_err(|e| e.to_string())?
        .to_test_function()
        .map_err(|e| e.to_string())?;
    let g = cfg
        .corpus
        .get(gid)
        .map_err(|e| e.to_string())?
        .to_test_function()
        .map_err(|e| e.to_string())?;
    let grid = if t.is_empty() {
        vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
    } else {
        t.to_vec()
    };
    let sg = Semigroup::new(64);
    let stream = GaussianPairStream::new(2, r, cfg.seed, 90);
    let curve = rt_curve(&f, &g, r, &grid, &sg, &stream, cfg.samples).map_err(|e| e.to_string())?;
    let csv = rt_csv(&curve, rho, fid, gid, cfg.seed);
    print!("{csv}");
    write_artifact(&cfg, "rt.csv", &csv)?;
    write_artifact(
        &cfg,
        "rt-config.json",
        &to_json_pretty(&echo(&cfg, "scan rt", &[rho], &grid)),
    )?;
    Ok(EXIT_PASS)
}

fn scan_exponent(cli: &Cli, family: ScanFamily, rho: f64, sizes: &[f64]) -> Result<i32, String> {
    let cfg = cli.resolve(1_000_000)?;
    let r = Correlation::new(rho).map_err(|e| e.to_string())?;
    let sizes = if sizes.is_empty() {
        vec![0.4, 0.3, 0.2, 0.15, 0.1]
    } else {
        sizes.to_vec()
    };
    let sg = Semigroup::new(64);
    let stream = GaussianPairStream::new(2, r, cfg.seed, 100);
    let scan = exponent_scan(family, &sizes, r, &sg, &stream, cfg.samples)
        .map_err(|e| e.to_string())?;
    let csv = scan_csv(&scan, cfg.seed);
    print!("{csv}");
    write_artifact(&cfg, "exponent.csv", &csv)?;
    write_artifact(
        &cfg,
        "exponent-config.json",
        &to_json_pretty(&scan_echo(&scan, echo(&cfg, "scan exponent", &[rho], &[]))),
    )?;
    Ok(EXIT_PASS)
}

fn calibrate(cli: &Cli) -> Result<i32, String> {
    let cfg = cli.resolve(400_000)?;
    let sg = Semigroup::new(64);
    let r9 = Correlation::new(0.9).map_err(|e| e.to_string())?;
    let stream = GaussianPairStream::new(2, r9, cfg.seed, 110);
    // exponent constant on the wedge family
    let scan = exponent_scan(
        ScanFamily::Wedge,
        &[0.4, 0.3, 0.2, 0.15, 0.1],
        r9,
        &sg,
        &stream,
        cfg.samples,
    )
    .map_err(|e| e.to_string())?;
    let c_exp = scan.c_values.iter().cloned().fold(0.0f64, f64::max) * 1.5;
    // time-reversal constant on wedge vs fitted half-space
    let s0 = GaussianPairStream::new(2, Correlation::new(0.0).unwrap(), cfg.seed, 111);
    let wedge = ScanFamily::Wedge.member(0.3);
    let fit = fit_halfspace(&wedge, FitObjective::Sharp, &sg, &s0, cfg.samples)
        .map_err(|e| e.to_string())?;
    let best = TestFunction::HalfSpaceInd(gauss_stab_core::HalfSpace::new(
        fit.a.clone(),
        fit.b,
        gauss_stab_core::Orientation::Le,
    ));
    let mut c_tr = 0.0f64;
    for &tv in &[0.25, 0.5, 1.0] {
        let tp = TimeParam::new(tv).map_err(|e| e.to_string())?;
        let tr = time_reversal_bound(&wedge, &best, tp, &sg, &s0.substream(tv.to_bits()), cfg.samples)
            .map_err(|e| e.to_string())?;
        if tr.envelope > 0.0 {
            c_tr = c_tr.max(tr.sym_diff / tr.envelope);
        }
    }
    c_tr *= 1.5;
    #[derive(serde::Serialize)]
    struct Calibration {
        seed: u64,
        samples: u64,
        exponent_c: f64,
        exponent_c_rows: Vec<f64>,
        time_reversal_c: f64,
    }
    let out = to_json_pretty(&Calibration {
        seed: cfg.seed,
        samples: cfg.samples,
        exponent_c: c_exp,
        exponent_c_rows: scan.c_values.clone(),
        time_reversal_c: c_tr,
    });
    print!("{out}");
    write_artifact(&cfg, "calibration.json", &out)?;
    Ok(EXIT_PASS)
}

/// Cross-stability sanity used by tests and docs: returns the pair
/// (F_ab(t), F'_ab(t)).
pub fn cross_stability_pair(a: f64, b: f64, t: TimeParam) -> (f64, f64) {
    (
        halfspace_cross_stability(a, b, t),
        halfspace_cross_stability_deriv(a, b, t),
    )
}

/// Expose mean computation for the binary's diagnostics.
pub fn member_mean(f: &TestFunction) -> f64 {
    gauss_mean(f)
}
