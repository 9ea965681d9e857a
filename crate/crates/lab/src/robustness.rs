//! Robustness machinery around the stability deficit: the first-order
//! (Poincaré-type) linear-fit inequality, time-reversal control of
//! symmetric differences, half-space fitting, the change-of-correlation
//! comparison, Lipschitz tail bounds, and the deficit-exponent scan.

use crate::bvn::k_fast;
use crate::nelder_mead::minimize_restarts;
use crate::sampling::{mc_expectation, GaussianPairStream, McEstimate};
use crate::stability::{gauss_mean, StabilityError};
use gauss_stab_core::semigroup::{AxisBox, HalfSpace, Orientation, Semigroup, TestFunction, TimeParam};
use gauss_stab_core::{norm_cdf, norm_pdf, norm_quantile, Correlation};
use serde::Serialize;
use std::f64::consts::PI;

/// The linear-fit inequality for a pair of smooth functions v, w:
/// with a = ½(E∇v + E∇w),
///   E(v(X) - ⟨X,a⟩ - Ev)² + E(w(X) - ⟨X,a⟩ - Ew)²
///     ≤ E_ρ |∇v(X) - ∇w(Y)|² / (2(1-ρ)),
/// valid for ρ ≥ 0. Here v = Φ⁻¹∘P_t f and w = Φ⁻¹∘P_t g.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareFit {
    pub a: Vec<f64>,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

pub fn poincare_fit(
    f: &TestFunction,
    g: &TestFunction,
    rho: Correlation,
    t: TimeParam,
    sg: &Semigroup,
    stream: &GaussianPairStream,
    count: u64,
) -> Result<PoincareFit, StabilityError> {
    assert!(rho.get() >= 0.0, "linear-fit inequality needs ρ ≥ 0");
    let dim = f.dim();
    // pass 1: means of v, w, ∇v, ∇w under γ (moderate budget suffices)
    let s0 = stream.substream(101);
    let n0 = count.min(100_000).max(10_000);
    let ev = mc_expectation(|x, _| sg.v_t(f, t, x).unwrap_or(f64::NAN), &s0, n0)?.mean;
    let ew = mc_expectation(|x, _| sg.v_t(g, t, x).unwrap_or(f64::NAN), &s0, n0)?.mean;
    let mut a = vec![0.0; dim];
    for (i, ai) in a.iter_mut().enumerate() {
        let gv = mc_expectation(
            |x, _| sg.grad_v_t(f, t, x).map(|g| g[i]).unwrap_or(f64::NAN),
            &s0,
            n0,
        )?;
        let gw = mc_expectation(
            |x, _| sg.grad_v_t(g, t, x).map(|g| g[i]).unwrap_or(f64::NAN),
            &s0,
            n0,
        )?;
        *ai = 0.5 * (gv.mean + gw.mean);
    }
    // pass 2: both sides on a fresh substream
    let s1 = stream.substream(102).with_rho(rho);
    let a_ref = &a;
    let lhs = mc_expectation(
        |x, _| {
            let dot: f64 = x.iter().zip(a_ref).map(|(x, a)| x * a).sum();
            let dv = match sg.v_t(f, t, x) {
                Ok(v) => v - dot - ev,
                Err(_) => return f64::NAN,
            };
            let dw = match sg.v_t(g, t, x) {
                Ok(w) => w - dot - ew,
                Err(_) => return f64::NAN,
            };
            dv * dv + dw * dw
        },
        &s1,
        count,
    )?;
    let denom = 2.0 * (1.0 - rho.get());
    let rhs = mc_expectation(
        |x, y| {
            let (gv, gw) = match (sg.grad_v_t(f, t, x), sg.grad_v_t(g, t, y)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return f64::NAN,
            };
            gv.iter()
                .zip(&gw)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / denom
        },
        &s1,
        count,
    )?;
    Ok(PoincareFit {
        a,
        lhs: lhs.mean,
        lhs_se: lhs.std_error,
        rhs: rhs.mean,
        rhs_se: rhs.std_error,
    })
}

/// Time-reversal control: γ(AΔB) ≤ C·max{L, (e^{2t}-1)^{1/4} √L} with
/// L = E|P_t 1_A - P_t 1_B|.
#[derive(Debug, Clone, Serialize)]
pub struct TimeReversal {
    pub sym_diff: f64,
    pub sym_diff_se: f64,
    pub smooth_l1: f64,
    pub smooth_l1_se: f64,
    /// max{L, (e^{2t}-1)^{1/4} √L} — multiply by the calibrated constant.
    pub envelope: f64,
}

pub fn time_reversal_bound(
    a: &TestFunction,
    b: &TestFunction,
    t: TimeParam,
    sg: &Semigroup,
    stream: &GaussianPairStream,
    count: u64,
) -> Result<TimeReversal, StabilityError> {
    let sym = mc_expectation(
        |x, _| (a.eval(x) - b.eval(x)).abs(),
        stream,
        count,
    )?;
    let smooth = mc_expectation(
        |x, _| (sg.p_t_auto(a, t, x) - sg.p_t_auto(b, t, x)).abs(),
        &stream.substream(7),
        count,
    )?;
    let l = smooth.mean.max(0.0);
    let spread = (t.t().exp().powi(2) - 1.0).powf(0.25);
    Ok(TimeReversal {
        sym_diff: sym.mean,
        sym_diff_se: sym.std_error,
        smooth_l1: smooth.mean,
        smooth_l1_se: smooth.std_error,
        envelope: l.max(spread * l.sqrt()),
    })
}

/// F_ab(t) = E[1_{X≥a} (P_t 1_{·≥b})(X)] = Pr(X ≥ a, Y ≥ b) at
/// correlation e^{-t}, by direct quadrature.
pub fn halfspace_cross_stability(a: f64, b: f64, t: TimeParam) -> f64 {
    let k = t.k();
    let et = t.t().exp();
    gauss_stab_core::quad::integrate(
        &|x| norm_pdf(x) * norm_cdf(k * (x - et * b)),
        a.max(-8.8),
        8.8f64.max(a + 1.0),
        1e-12,
    )
}

/// Closed-form derivative dF_ab/dt =
/// -(k_t/2π) exp(-(a² + b² - 2e^{-t}ab)/(2(1-e^{-2t}))).
pub fn halfspace_cross_stability_deriv(a: f64, b: f64, t: TimeParam) -> f64 {
    let d = (-t.t()).exp();
    let k = t.k();
    -(k / (2.0 * PI)) * (-(a * a + b * b - 2.0 * d * a * b) / (2.0 * (1.0 - d * d))).exp()
}

/// Change-of-correlation comparison at θ = cos(k·arccos ρ):
/// for γ(A) = ½, Pr_θ(X ∈ A, Y ∉ A) ≤ k · Pr_ρ(X ∈ A, Y ∉ A).
#[derive(Debug, Clone, Serialize)]
pub struct ChangeRho {
    pub theta: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

pub fn change_rho_check(
    a: &TestFunction,
    rho: Correlation,
    k: u32,
    stream: &GaussianPairStream,
    count: u64,
) -> Result<ChangeRho, StabilityError> {
    assert!(k >= 1);
    let mass = gauss_mean(a);
    assert!(
        (mass - 0.5).abs() <= 0.01,
        "change-of-ρ comparison requires γ(A) = ½ (got {mass})"
    );
    let theta = Correlation::new((k as f64 * rho.get().acos()).cos())
        .map_err(StabilityError::Gauss)?;
    let cross = |x: &[f64], y: &[f64]| ((a.eval(x) > 0.5) && (a.eval(y) <= 0.5)) as u64 as f64;
    let lhs = mc_expectation(cross, &stream.with_rho(theta), count)?;
    let rhs = mc_expectation(cross, &stream.substream(3).with_rho(rho), count)?;
    Ok(ChangeRho {
        theta: theta.get(),
        lhs: lhs.mean,
        lhs_se: lhs.std_error,
        rhs: k as f64 * rhs.mean,
        rhs_se: k as f64 * rhs.std_error,
    })
}

/// Exact half-space values for the change-of-ρ comparison:
/// Pr(X₁ ≤ 0, Y₁ > 0) = arccos(r)/(2π).
pub fn halfspace_cross_mass(r: f64) -> f64 {
    r.acos() / (2.0 * PI)
}

/// One row of a Lipschitz tail check:
/// Pr_ρ(v(X) - v(Y) ≥ L·s·√(2(1-ρ))) ≤ 1 - Φ(s).
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub s: f64,
    pub prob: f64,
    pub prob_se: f64,
    pub bound: f64,
}

pub fn lipschitz_tail_check<V>(
    v: V,
    lip: f64,
    rho: Correlation,
    s_values: &[f64],
    stream: &GaussianPairStream,
    count: u64,
) -> Result<Vec<TailRow>, StabilityError>
where
    V: Fn(&[f64]) -> f64 + Sync,
{
    let st = stream.with_rho(rho);
    let scale = lip * (2.0 * (1.0 - rho.get())).sqrt();
    let mut rows = Vec::new();
    for &s in s_values {
        let level = s * scale;
        let est = mc_expectation(|x, y| (v(x) - v(y) >= level) as u64 as f64, &st, count)?;
        rows.push(TailRow {
            s,
            prob: est.mean,
            prob_se: est.std_error,
            bound: 1.0 - norm_cdf(s),
        });
    }
    Ok(rows)
}

/// The exponential-moment bound for a 1-Lipschitz f with median M:
/// E exp(λ f²/2) ≤ (2/√(1-λ)) exp(λM²/(2(1-λ))), 0 < λ < 1.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub lambda: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub bound: f64,
}

pub fn lipschitz_moment_check<V>(
    f: V,
    lambdas: &[f64],
    stream: &GaussianPairStream,
    count: u64,
) -> Result<(f64, Vec<MomentRow>), StabilityError>
where
    V: Fn(&[f64]) -> f64 + Sync,
{
    // empirical median from a dedicated subsample
    let med_n = count.min(100_000);
    let mut vals = Vec::with_capacity(med_n as usize);
    stream
        .substream(11)
        .for_each_pair(med_n, |x, _| vals.push(f(x)));
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let mut rows = Vec::new();
    for &lam in lambdas {
        assert!((0.0..1.0).contains(&lam));
        let est = mc_expectation(
            |x, _| {
                let v = f(x);
                (lam * v * v / 2.0).exp()
            },
            stream,
            count,
        )?;
        let bound = (2.0 / (1.0 - lam).sqrt()) * (lam * median * median / (2.0 * (1.0 - lam))).exp();
        rows.push(MomentRow {
            lambda: lam,
            lhs: est.mean,
            lhs_se: est.std_error,
            bound,
        });
    }
    Ok((median, rows))
}

/// Best half-space (or Gaussian-threshold) approximation to f.
#[derive(Debug, Clone, Serialize)]
pub struct HalfSpaceFit {
    pub a: Vec<f64>,
    pub b: f64,
    /// E|f - fit| on a fresh sample set.
    pub dist: f64,
    pub dist_se: f64,
}

/// Objective shape for the fit: `Sharp` measures γ(AΔH) against the
/// indicator of {⟨a,x⟩ ≤ b}; `Smooth` measures E|f - Φ(⟨a,x⟩ - b)|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitObjective {
    Sharp,
    Smooth,
}

pub fn fit_halfspace(
    f: &TestFunction,
    objective: FitObjective,
    sg: &Semigroup,
    stream: &GaussianPairStream,
    final_count: u64,
) -> Result<HalfSpaceFit, StabilityError> {
    let dim = f.dim();
    // initial direction: E ∇P_t f at a moderate smoothing time
    let t0 = TimeParam::new(0.5)?;
    let init = stream.substream(21);
    let mut a0 = vec![0.0; dim];
    {
        let mut n = 0u64;
        init.for_each_pair(2000, |x, _| {
            let g = sg.grad_p_t(f, t0, x);
            for (ai, gi) in a0.iter_mut().zip(&g) {
                *ai += gi;
            }
            n += 1;
        });
        for ai in &mut a0 {
            // P_t decreases toward the boundary normal for "≤" sets; the
            // optimizer handles overall sign, we just need a direction
            *ai = -*ai / n as f64;
        }
        let norm: f64 = a0.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-9 {
            a0 = vec![0.0; dim];
            a0[0] = 1.0;
        } else {
            for ai in &mut a0 {
                *ai /= norm;
            }
        }
    }
    let ef = gauss_mean(f);
    let b0 = norm_quantile(ef.clamp(1e-9, 1.0 - 1e-9)).map_err(StabilityError::Gauss)?;

    // fixed common sample set for the noisy objective
    let fit_n = 20_000u64;
    let mut xs: Vec<f64> = Vec::with_capacity(fit_n as usize * dim);
    let mut fvals: Vec<f64> = Vec::with_capacity(fit_n as usize);
    stream.substream(22).for_each_pair(fit_n, |x, _| {
        xs.extend_from_slice(x);
        fvals.push(f.eval_unit(x));
    });
    let obj = |p: &[f64]| -> f64 {
        let (a, b) = (&p[..dim], p[dim]);
        if a.iter().all(|&c| c.abs() < 1e-12) {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for (chunk, &fv) in xs.chunks_exact(dim).zip(&fvals) {
            let s: f64 = a.iter().zip(chunk).map(|(a, x)| a * x).sum();
            let h = match objective {
                FitObjective::Sharp => (s <= b) as u64 as f64,
                FitObjective::Smooth => norm_cdf(s - b),
            };
            acc += (fv - h).abs();
        }
        acc / fit_n as f64
    };
    let mut x0 = a0.clone();
    x0.push(b0);
    let best = minimize_restarts(obj, &x0, 0.3, 2000, 1e-3, 3);
    let (a, b) = (best.x[..dim].to_vec(), best.x[dim]);

    // final distance on an independent stream
    let a_ref = &a;
    let final_est = mc_expectation(
        |x, _| {
            let s: f64 = a_ref.iter().zip(x).map(|(a, x)| a * x).sum();
            let h = match objective {
                FitObjective::Sharp => (s <= b) as u64 as f64,
                FitObjective::Smooth => norm_cdf(s - b),
            };
            (f.eval_unit(x) - h).abs()
        },
        &stream.substream(23),
        final_count,
    )?;
    Ok(HalfSpaceFit {
        a,
        b,
        dist: final_est.mean,
        dist_se: final_est.std_error,
    })
}

/// The predicted small-deficit exponent for the distance-to-half-space
/// bound at correlation ρ (the ε → 0 exponent is ¼ at ρ → 0).
pub fn theoretical_exponent(rho: f64) -> f64 {
    0.25 * (1.0 - rho - rho * rho + rho.powi(3)) / (1.0 - rho + 3.0 * rho * rho + rho.powi(3))
}

/// Exact Pr_ρ(X ∈ A, Y ∈ B) for disjoint unions of axis-aligned boxes,
/// by inclusion-exclusion over box corners per axis.
pub fn box_union_joint(a: &[AxisBox], b: &[AxisBox], rho: Correlation) -> f64 {
    let mut total = 0.0;
    for ba in a {
        for bb in b {
            let mut prod = 1.0;
            for i in 0..ba.lo.len() {
                let (l1, h1) = (ba.lo[i], ba.hi[i]);
                let (l2, h2) = (bb.lo[i], bb.hi[i]);
                prod *= k_fast(h1, h2, rho) - k_fast(l1, h2, rho) - k_fast(h1, l2, rho)
                    + k_fast(l1, l2, rho);
                if prod == 0.0 {
                    break;
                }
            }
            total += prod;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Families of measure-½ sets for the exponent scan, parametrized by a
/// size that controls the distance to the nearest half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanFamily {
    /// {x₁ ≤ s}: exactly a half-space for every s, so the deficit is
    /// identically zero and rows are flagged unresolvable.
    ShiftedHalfspace,
    /// {x₁ < ε, x₂ < 0} ∪ {x₁ < -ε, x₂ ≥ 0}.
    Wedge,
    /// {x₁ ≤ -ε} ∪ {ε < x₁ ≤ s(ε)} with Φ(s) = 2Φ(ε) - ½.
    Strip,
}

impl ScanFamily {
    /// The member at the given size, as explicit boxes.
    pub fn boxes(self, size: f64) -> Vec<AxisBox> {
        match self {
            ScanFamily::ShiftedHalfspace => vec![AxisBox {
                lo: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                hi: vec![size, f64::INFINITY],
            }],
            ScanFamily::Wedge => vec![
                AxisBox {
                    lo: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                    hi: vec![size, 0.0],
                },
                AxisBox {
                    lo: vec![f64::NEG_INFINITY, 0.0],
                    hi: vec![-size, f64::INFINITY],
                },
            ],
            ScanFamily::Strip => {
                let upper = norm_quantile(2.0 * norm_cdf(size) - 0.5)
                    .expect("strip size must satisfy Φ(ε) < 3/4");
                vec![
                    AxisBox {
                        lo: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                        hi: vec![-size, f64::INFINITY],
                    },
                    AxisBox {
                        lo: vec![size, f64::NEG_INFINITY],
                        hi: vec![upper, f64::INFINITY],
                    },
                ]
            }
        }
    }

    pub fn member(self, size: f64) -> TestFunction {
        TestFunction::ProductSet {
            dim: 2,
            boxes: self.boxes(size),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub size: f64,
    pub dist_l1: f64,
    pub dist_se: f64,
    pub delta: f64,
    pub delta_se: f64,
    /// true when the deficit is exactly zero (the family member is a
    /// half-space) and no exponent information can be extracted.
    pub dropped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub family: ScanFamily,
    pub rho: f64,
    pub rows: Vec<ScanRow>,
    /// least-squares slope of log dist against log(δ/√(1-ρ)), over
    /// non-dropped rows (at fixed ρ this equals the log dist vs log δ
    /// slope).
    pub fitted_slope: Option<f64>,
    pub theoretical_exponent: f64,
    /// per-row calibration constants dist/(δ/√(1-ρ))^{1/4}.
    pub c_values: Vec<f64>,
}

/// Scan a family over sizes at fixed ρ: exact deficit via the bivariate
/// box decomposition, fitted half-space distance via Monte Carlo.
pub fn exponent_scan(
    family: ScanFamily,
    sizes: &[f64],
    rho: Correlation,
    sg: &Semigroup,
    stream: &GaussianPairStream,
    dist_samples: u64,
) -> Result<ScanResult, StabilityError> {
    assert!(rho.get() > 0.0);
    let mut rows = Vec::new();
    let mut c_values = Vec::new();
    let mut logs: Vec<(f64, f64)> = Vec::new();
    for (i, &size) in sizes.iter().enumerate() {
        let boxes = family.boxes(size);
        let f = family.member(size);
        let ef = gauss_mean(&f);
        // exact deficit: J(Ef, Ef) - Pr_ρ(X∈A, Y∈A), both to ~1e-12
        let j = gauss_stab_core::joint_quantile_prob(ef, ef, rho)?;
        let joint = box_union_joint(&boxes, &boxes, rho);
        let delta = j - joint;
        let dropped = family == ScanFamily::ShiftedHalfspace || delta.abs() < 1e-11;
        let dist = fit_halfspace(
            &f,
            FitObjective::Sharp,
            sg,
            &stream.substream(1000 + i as u64),
            dist_samples,
        )?;
        if !dropped {
            let scaled = delta / (1.0 - rho.get()).sqrt();
            c_values.push(dist.dist / scaled.powf(0.25));
            if dist.dist > 0.0 {
                logs.push((scaled.ln(), dist.dist.ln()));
            }
        }
        rows.push(ScanRow {
            size,
            dist_l1: dist.dist,
            dist_se: dist.dist_se,
            delta,
            delta_se: 1e-12,
            dropped,
        });
    }
    let fitted_slope = if logs.len() >= 2 {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(ScanResult {
        family,
        rho: rho.get(),
        rows,
        fitted_slope,
        theoretical_exponent: theoretical_exponent(rho.get()),
        c_values,
    })
}

/// Exact γ(AΔB) for two half-spaces, via the bivariate normal CDF on
/// the 2-plane spanned by the normals.
pub fn halfspace_sym_diff(a: &HalfSpace, b: &HalfSpace) -> f64 {
    // normalize both to {û·x ≤ α} form
    let le_form = |h: &HalfSpace| -> (Vec<f64>, f64) {
        let n = h.norm();
        let sign = match h.orientation {
            Orientation::Le => 1.0,
            Orientation::Ge => -1.0,
        };
        (
            h.a.iter().map(|c| sign * c / n).collect(),
            sign * h.b / n,
        )
    };
    let (u, alpha) = le_form(a);
    let (v, beta) = le_form(b);
    let cos: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
    let inter = if cos >= 1.0 - 1e-7 {
        // parallel: nested half-spaces
        norm_cdf(alpha).min(norm_cdf(beta))
    } else if cos <= -(1.0 - 1e-7) {
        // antipodal: complementary up to a slab
        (norm_cdf(alpha) + norm_cdf(beta) - 1.0).max(0.0)
    } else {
        let rho = Correlation::new(cos).expect("interior");
        gauss_stab_core::bvn_k(alpha, beta, rho).expect("finite levels")
    };
    (norm_cdf(alpha) + norm_cdf(beta) - 2.0 * inter).max(0.0)
}

/// Polish a half-space fit of a half-space target on the exact symmetric
/// difference objective (smooth in the parameters, zero at the truth).
pub fn polish_halfspace_fit(target: &HalfSpace, init_a: &[f64], init_b: f64) -> HalfSpaceFit {
    let dim = init_a.len();
    let obj = |p: &[f64]| {
        if p[..dim].iter().all(|&c| c.abs() < 1e-12) {
            return f64::INFINITY;
        }
        let h = HalfSpace::new(p[..dim].to_vec(), p[dim], Orientation::Le);
        halfspace_sym_diff(target, &h)
    };
    let mut x0 = init_a.to_vec();
    x0.push(init_b);
    let best = minimize_restarts(obj, &x0, 0.05, 4000, 1e-12, 2);
    HalfSpaceFit {
        a: best.x[..dim].to_vec(),
        b: best.x[dim],
        dist: best.value,
        dist_se: 0.0,
    }
}

/// Polish a Gaussian-threshold fit on a deterministic tensor
/// Gauss-Hermite objective E|f - Φ(⟨a,x⟩ - b)| (exact for smooth f up to
/// quadrature error; zero at the truth when f is itself a threshold).
pub fn polish_threshold_fit(f: &TestFunction, init_a: &[f64], init_b: f64) -> HalfSpaceFit {
    let dim = f.dim();
    let (nodes, weights) = gauss_stab_core::quad::gauss_hermite(40);
    // precompute the probe grid and target values (dim ≤ 2 in practice)
    assert!(dim <= 2, "quadrature polish supports dim <= 2");
    let mut grid: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    if dim == 1 {
        for (i, &xi) in nodes.iter().enumerate() {
            let x = vec![xi];
            let fv = f.eval_unit(&x);
            grid.push((x, fv, weights[i]));
        }
    } else {
        for (i, &xi) in nodes.iter().enumerate() {
            for (j, &xj) in nodes.iter().enumerate() {
                let x = vec![xi, xj];
                let fv = f.eval_unit(&x);
                grid.push((x, fv, weights[i] * weights[j]));
            }
        }
    }
    let obj = |p: &[f64]| {
        let (a, b) = (&p[..dim], p[dim]);
        let mut acc = 0.0;
        for (x, fv, w) in &grid {
            let s: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
            acc += w * (fv - norm_cdf(s - b)).abs();
        }
        acc
    };
    let mut x0 = init_a.to_vec();
    x0.push(init_b);
    let best = minimize_restarts(obj, &x0, 0.05, 4000, 1e-12, 2);
    HalfSpaceFit {
        a: best.x[..dim].to_vec(),
        b: best.x[dim],
        dist: best.value,
        dist_se: 0.0,
    }
}

/// Convenience: the measure-½ half-space at the origin in 2-D.
pub fn origin_halfspace() -> TestFunction {
    TestFunction::HalfSpaceInd(HalfSpace::new(vec![1.0, 0.0], 0.0, Orientation::Le))
}

#[derive(Debug, Clone, Serialize)]
pub struct McPair {
    pub estimate: McEstimate,
}
