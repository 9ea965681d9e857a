//! Scalar normal special functions and the bivariate functionals J and K.
//!
//! K(x, y; ρ) = Pr_ρ(X ≤ x, Y ≤ y) for ρ-correlated standard Gaussians is
//! computed through the one-dimensional reduction
//! K(x, y) = ∫_{-∞}^{x} φ(s) Φ((y - ρs)/√(1-ρ²)) ds
//! with adaptive Gauss-Kronrod quadrature. J is K composed with normal
//! quantiles in each argument.

use crate::quad;
use core::fmt;

/// Largest |ρ| accepted; beyond this 1/√(1-ρ²) overwhelms the quadrature.
pub const RHO_CAP: f64 = 1.0 - 1e-8;

/// Integration cutoff: φ(x) < 1e-17 beyond |x| = 8.8.
const GAUSS_TAIL: f64 = 8.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussError {
    /// Correlation outside the open interval (-1, 1) (or past the internal cap).
    CorrelationOutOfRange,
    /// Probability argument outside [0, 1].
    ProbOutOfRange,
    /// Non-finite argument where a finite one is required.
    NonFinite,
}

impl fmt::Display for GaussError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaussError::CorrelationOutOfRange => write!(f, "correlation must satisfy |rho| < 1"),
            GaussError::ProbOutOfRange => write!(f, "probability argument must lie in [0, 1]"),
            GaussError::NonFinite => write!(f, "argument must be finite"),
        }
    }
}

/// A validated correlation ρ with |ρ| < 1 strictly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self, GaussError> {
        if rho.is_finite() && libm::fabs(rho) <= RHO_CAP {
            Ok(Correlation(rho))
        } else {
            Err(GaussError::CorrelationOutOfRange)
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// √(1 - ρ²)
    #[inline]
    pub fn comp(self) -> f64 {
        libm::sqrt(1.0 - self.0 * self.0)
    }

    /// The reflection ρ ↦ -ρ.
    #[inline]
    pub fn neg(self) -> Self {
        Correlation(-self.0)
    }
}

/// Standard normal density φ(x) = e^{-x²/2}/√(2π).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.39894228040143267;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF Φ(x) = ∫_{-∞}^x φ. Total on the extended reals.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    // erfc keeps full relative accuracy in the lower tail where
    // 1 - erf(x/√2) would cancel.
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Normal quantile Φ⁻¹(p) on (0, 1), with Φ⁻¹(0) = -∞ and Φ⁻¹(1) = +∞.
///
/// Rational initial guess (Acklam) polished by Newton steps against
/// `norm_cdf`; |Φ(Φ⁻¹(p)) - p| ≤ 1e-15 over (0, 1).
pub fn norm_quantile(p: f64) -> Result<f64, GaussError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GaussError::ProbOutOfRange);
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut x = acklam(p);
    // Two Newton corrections; the second is a no-op except in the far tails.
    for _ in 0..2 {
        let err = norm_cdf(x) - p;
        let d = norm_pdf(x);
        if d == 0.0 {
            break;
        }
        // Halley's correction term keeps the tail steps stable.
        let u = err / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// Acklam's rational approximation to Φ⁻¹, relative error < 1.2e-9.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -39.69683028665376,
        220.9460984245205,
        -275.9285104469687,
        138.3577518672690,
        -30.66479806614716,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -54.47609879822406,
        161.5858368580409,
        -155.6989798598866,
        66.80131188771972,
        -13.28068155288572,
    ];
    const C: [f64; 6] = [
        -0.007784894002430293,
        -0.3223964580411365,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        0.007784695709041462,
        0.3224671290700398,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Gaussian isoperimetric profile I(p) = φ(Φ⁻¹(p)), with I(0) = I(1) = 0.
pub fn gauss_isoperimetric_i(p: f64) -> Result<f64, GaussError> {
    let x = norm_quantile(p)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(norm_pdf(x))
}

/// Bivariate normal CDF K(x, y; ρ) = Pr_ρ(X ≤ x, Y ≤ y).
///
/// Arguments may be ±∞ (limits propagate exactly). Absolute error ≤ 1e-10.
pub fn bvn_k(x: f64, y: f64, rho: Correlation) -> Result<f64, GaussError> {
    if x.is_nan() || y.is_nan() {
        return Err(GaussError::NonFinite);
    }
    let r = rho.get();
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(norm_cdf(y));
    }
    if y == f64::INFINITY {
        return Ok(norm_cdf(x));
    }
    if r == 0.0 {
        return Ok(norm_cdf(x) * norm_cdf(y));
    }
    // For x far in the upper tail, split off the exact complement so the
    // quadrature interval stays bounded.
    if x > GAUSS_TAIL {
        // K(x,y) = Φ(y) - Pr(X > x, Y ≤ y), second term ≤ 1-Φ(x) < 1e-17
        return Ok(norm_cdf(y));
    }
    if y > GAUSS_TAIL {
        return Ok(norm_cdf(x));
    }
    let inv_comp = 1.0 / rho.comp();
    let integrand = move |s: f64| norm_pdf(s) * norm_cdf((y - r * s) * inv_comp);
    let lo = -GAUSS_TAIL;
    if x <= lo {
        return Ok(0.0);
    }
    let v = quad::integrate(&integrand, lo, x, 1e-12);
    // Guard against tiny negative round-off at the corners.
    Ok(v.clamp(0.0, 1.0))
}

/// J(x, y; ρ) = Pr_ρ(X ≤ Φ⁻¹(x), Y ≤ Φ⁻¹(y)) for x, y ∈ [0, 1].
///
/// Boundary values are exact: J(0,·) = J(·,0) = 0, J(1,y) = y, J(x,1) = x.
pub fn joint_quantile_prob(x: f64, y: f64, rho: Correlation) -> Result<f64, GaussError> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(GaussError::ProbOutOfRange);
    }
    if x == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(y);
    }
    if y == 1.0 {
        return Ok(x);
    }
    bvn_k(norm_quantile(x)?, norm_quantile(y)?, rho)
}

/// J evaluated directly at quantile-scale arguments (u, v) = (Φ⁻¹x, Φ⁻¹y).
///
/// Identical to `joint_quantile_prob(Φ(u), Φ(v), ρ)` but avoids the
/// round-trip through probabilities; used in hot Monte Carlo loops where
/// the lift Φ⁻¹∘f is available in closed form.
#[inline]
pub fn joint_from_lifted(u: f64, v: f64, rho: Correlation) -> Result<f64, GaussError> {
    bvn_k(u, v, rho)
}

/// The partial derivatives (∂K/∂x, ∂K/∂y) at (x, y; ρ):
/// ∂K/∂x = φ(x)Φ((y-ρx)/√(1-ρ²)) and symmetrically in y.
pub fn k_partials(x: f64, y: f64, rho: Correlation) -> Result<(f64, f64), GaussError> {
    if !x.is_finite() || !y.is_finite() {
        return Err(GaussError::NonFinite);
    }
    let r = rho.get();
    let inv_comp = 1.0 / rho.comp();
    let kx = norm_pdf(x) * norm_cdf((y - r * x) * inv_comp);
    let ky = norm_pdf(y) * norm_cdf((x - r * y) * inv_comp);
    Ok((kx, ky))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent composite-Simpson oracle, deliberately not sharing code
    /// with the Gauss-Kronrod engine.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn pdf_frozen_values() {
        // 1/√(2π) exactly, as the nearest double
        assert_eq!(norm_pdf(0.0), 0.39894228040143267);
        assert!((norm_pdf(2.0) - 0.05399096651318806).abs() < 1e-16);
        assert_eq!(norm_pdf(1.0), norm_pdf(-1.0));
    }

    #[test]
    fn cdf_against_simpson_oracle() {
        // Φ(1.959963984540054) = 0.975 (the 97.5% quantile)
        let x = 1.959963984540054;
        assert!((norm_cdf(x) - 0.975).abs() < 1e-12);
        for &z in &[-3.0, -1.0, -0.1, 0.0, 0.7, 2.5] {
            let oracle = simpson(norm_pdf, -9.0, z, 40_000);
            assert!((norm_cdf(z) - oracle).abs() < 1e-11, "z={z}");
        }
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(norm_cdf(f64::INFINITY), 1.0);
        assert_eq!(norm_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn quantile_matches_bisection_oracle() {
        // independent bisection on norm_cdf
        let bisect = |p: f64| {
            let (mut lo, mut hi) = (-9.0f64, 9.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if norm_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for &p in &[0.001, 0.02425, 0.25, 0.5, 0.7, 0.975, 0.999] {
            let got = norm_quantile(p).unwrap();
            assert!((got - bisect(p)).abs() < 1e-9, "p={p}");
        }
        assert!((norm_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert_eq!(norm_quantile(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(norm_quantile(1.0).unwrap(), f64::INFINITY);
        assert_eq!(norm_quantile(-0.1), Err(GaussError::ProbOutOfRange));
        assert_eq!(norm_quantile(1.1), Err(GaussError::ProbOutOfRange));
        assert!(norm_quantile(f64::NAN).is_err());
    }

    #[test]
    fn isoperimetric_profile() {
        assert!((gauss_isoperimetric_i(0.5).unwrap() - 0.3989422804014327).abs() < 1e-15);
        // I(0.975) = φ(Φ⁻¹(0.975)) ≈ 0.05844507
        assert!((gauss_isoperimetric_i(0.975).unwrap() - 0.05844507).abs() < 1e-8);
        assert_eq!(gauss_isoperimetric_i(0.0).unwrap(), 0.0);
        assert_eq!(gauss_isoperimetric_i(1.0).unwrap(), 0.0);
    }

    #[test]
    fn correlation_validation() {
        assert!(Correlation::new(0.9999).is_ok());
        assert_eq!(
            Correlation::new(1.0),
            Err(GaussError::CorrelationOutOfRange)
        );
        assert_eq!(
            Correlation::new(-1.0),
            Err(GaussError::CorrelationOutOfRange)
        );
        assert!(Correlation::new(f64::NAN).is_err());
        let r = Correlation::new(0.6).unwrap();
        assert!((r.comp() - 0.8).abs() < 1e-15);
        assert_eq!(r.neg().get(), -0.6);
    }

    #[test]
    fn bvn_arcsin_identity_at_origin() {
        // K(0, 0; ρ) = 1/4 + arcsin(ρ)/(2π)
        use core::f64::consts::PI;
        let k = bvn_k(0.0, 0.0, Correlation::new(0.5).unwrap()).unwrap();
        assert!((k - 1.0 / 3.0).abs() < 1e-10, "got {k}");
        for &r in &[-0.9, -0.3, 0.0, 0.2, 0.7, 0.95] {
            let k = bvn_k(0.0, 0.0, Correlation::new(r).unwrap()).unwrap();
            let exact = 0.25 + libm::asin(r) / (2.0 * PI);
            assert!((k - exact).abs() < 1e-10, "rho={r}");
        }
    }

    #[test]
    fn bvn_limits_and_products() {
        let r = Correlation::new(0.3).unwrap();
        assert_eq!(bvn_k(f64::NEG_INFINITY, 1.0, r).unwrap(), 0.0);
        assert_eq!(bvn_k(f64::INFINITY, 1.0, r).unwrap(), norm_cdf(1.0));
        assert_eq!(bvn_k(1.0, f64::INFINITY, r).unwrap(), norm_cdf(1.0));
        assert!(bvn_k(f64::NAN, 0.0, r).is_err());
        let indep = Correlation::new(0.0).unwrap();
        let k = bvn_k(0.7, -0.2, indep).unwrap();
        assert!((k - norm_cdf(0.7) * norm_cdf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn k_partials_match_finite_differences() {
        let r = Correlation::new(0.5).unwrap();
        let (x, y) = (1.0, -1.0);
        let h = 1e-5;
        let (kx, ky) = k_partials(x, y, r).unwrap();
        let fd_x =
            (bvn_k(x + h, y, r).unwrap() - bvn_k(x - h, y, r).unwrap()) / (2.0 * h);
        let fd_y =
            (bvn_k(x, y + h, r).unwrap() - bvn_k(x, y - h, r).unwrap()) / (2.0 * h);
        assert!((kx - fd_x).abs() < 1e-6, "dK/dx {kx} vs {fd_x}");
        assert!((ky - fd_y).abs() < 1e-6, "dK/dy {ky} vs {fd_y}");
    }

    #[test]
    fn j_boundary_values() {
        let r = Correlation::new(0.5).unwrap();
        assert_eq!(joint_quantile_prob(0.0, 0.7, r).unwrap(), 0.0);
        assert_eq!(joint_quantile_prob(0.7, 0.0, r).unwrap(), 0.0);
        assert_eq!(joint_quantile_prob(1.0, 0.7, r).unwrap(), 0.7);
        assert_eq!(joint_quantile_prob(0.7, 1.0, r).unwrap(), 0.7);
        assert!(joint_quantile_prob(-0.1, 0.5, r).is_err());
        assert!(joint_quantile_prob(0.5, 1.5, r).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cdf_symmetry(x in -8.0f64..8.0) {
            let s = norm_cdf(x) + norm_cdf(-x);
            prop_assert!((s - 1.0).abs() < 1e-14);
        }

        #[test]
        fn quantile_round_trip(p in 1e-10f64..1.0) {
            let x = norm_quantile(p).unwrap();
            prop_assert!((norm_cdf(x) - p).abs() < 1e-12);
        }

        #[test]
        fn bvn_symmetry_and_frechet(
            x in -4.0f64..4.0,
            y in -4.0f64..4.0,
            r in -0.98f64..0.98,
        ) {
            let rho = Correlation::new(r).unwrap();
            let k = bvn_k(x, y, rho).unwrap();
            let kt = bvn_k(y, x, rho).unwrap();
            prop_assert!((k - kt).abs() < 1e-9);
            let (px, py) = (norm_cdf(x), norm_cdf(y));
            prop_assert!(k <= px.min(py) + 1e-10);
            prop_assert!(k >= (px + py - 1.0).max(0.0) - 1e-10);
        }

        #[test]
        fn j_reflection_identity(
            x in 0.01f64..0.99,
            y in 0.01f64..0.99,
            r in -0.95f64..0.95,
        ) {
            // J(x, y; ρ) = x - J(x, 1-y; -ρ)
            let rho = Correlation::new(r).unwrap();
            let lhs = joint_quantile_prob(x, y, rho).unwrap();
            let rhs = x - joint_quantile_prob(x, 1.0 - y, rho.neg()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9, "x={x} y={y} rho={r}");
        }

        #[test]
        fn j_monotone_in_each_argument(
            x in 0.05f64..0.9,
            y in 0.05f64..0.9,
            r in -0.9f64..0.9,
        ) {
            let rho = Correlation::new(r).unwrap();
            let j = joint_quantile_prob(x, y, rho).unwrap();
            let jx = joint_quantile_prob(x + 0.05, y, rho).unwrap();
            let jy = joint_quantile_prob(x, y + 0.05, rho).unwrap();
            prop_assert!(jx >= j - 1e-12);
            prop_assert!(jy >= j - 1e-12);
        }
    }
}
