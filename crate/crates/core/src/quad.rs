//! Quadrature backends: adaptive Gauss-Kronrod on finite intervals and
//! Gauss-Hermite rules for integrals against the standard normal density.

use alloc::vec::Vec;

// 15-point Kronrod abscissae on [-1, 1] (positive half, descending),
// with the embedded 7-point Gauss rule at the odd-indexed points.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod 7-15 panel on [a, b].
/// Returns (kronrod, |kronrod - gauss|, ∫|f| estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut resabs = WGK[7] * libm::fabs(fc);
    for j in 0..7 {
        let dx = half * XGK[j];
        let (fl, fr) = (f(center - dx), f(center + dx));
        kronrod += WGK[j] * (fl + fr);
        resabs += WGK[j] * (libm::fabs(fl) + libm::fabs(fr));
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fl + fr);
        }
    }
    kronrod *= half;
    gauss *= half;
    resabs *= half;
    (kronrod, libm::fabs(kronrod - gauss), resabs)
}

/// Adaptive Gauss-Kronrod integration of `f` over [a, b] to absolute
/// tolerance `tol`. Bisects panels whose embedded error estimate exceeds
/// their share of the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_floored(f, a, b, tol, 0.0)
}

/// Like `integrate`, but additionally accepts any panel whose error
/// estimate is below `noise`. Required when the integrand itself carries
/// numerical noise (e.g. it is an inner adaptive integral): without the
/// floor, the per-panel tolerance halves below the noise level and the
/// recursion degenerates into exhaustive bisection.
pub fn integrate_floored<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, noise: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, noise: f64, depth: u32) -> f64 {
        let (val, err, resabs) = gk15(f, a, b);
        // The round-off floor (scaled by ∫|f| so it survives panels whose
        // signed integral cancels) keeps integrands the embedded Gauss
        // rule already resolves exactly from recursing forever.
        let floor = (30.0 * f64::EPSILON * resabs).max(noise);
        // A minimum depth guards against accidentally small error
        // estimates (e.g. symmetric integrands where the embedded Gauss
        // and Kronrod rules happen to agree).
        // The depth cap bounds work on discontinuities, whose error/tol
        // ratio is scale-invariant under bisection: a jump ends up
        // localized to a panel of relative width 2^-48.
        if (err <= tol.max(floor) && depth >= 2) || depth >= 48 {
            return val;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, 0.5 * tol, noise, depth + 1)
            + recurse(f, mid, b, 0.5 * tol, noise, depth + 1)
    }
    recurse(f, a, b, tol, noise, 0)
}

/// Gauss-Hermite rule for the weight φ(x) = e^{-x²/2}/√(2π): returns
/// `(nodes, weights)` with Σ w_i = 1, exact for polynomials of degree
/// 2·len - 1. Nodes are in ascending order.
///
/// Computed by Newton iteration on the physicists' Hermite recurrence and
/// rescaled to the probabilists' weight.
pub fn gauss_hermite(len: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(len >= 1, "gauss_hermite: need at least one node");
    let n = len;
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    let mut z_prev = 0.0f64;
    let mut z_prev2 = 0.0f64;
    for i in 0..(n + 1) / 2 {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * z_prev2,
            3 => 1.91 * z - 0.91 * z_prev2,
            _ => 2.0 * z - z_prev2,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // Orthonormal physicists' Hermite functions at z.
            let mut p1 = libm::pow(core::f64::consts::PI, -0.25);
            let mut p2 = 0.0f64;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / (jf + 1.0)) * p2 - libm::sqrt(jf / (jf + 1.0)) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let dz = p1 / pp;
            z -= dz;
            if libm::fabs(dz) < 1e-15 {
                break;
            }
        }
        z_prev2 = z_prev;
        z_prev = z;
        // Physicists' node z, weight 2/pp²; rescale to the φ weight.
        nodes[i] = core::f64::consts::SQRT_2 * z;
        nodes[n - 1 - i] = -nodes[i];
        let w = 2.0 / (pp * pp) / libm::sqrt(core::f64::consts::PI);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_integrates_polynomial_exactly() {
        // degree 13 is within the 15-point Kronrod rule's exactness range
        let f = |x: f64| 3.0 * x * x + x.powi(13);
        let got = integrate(&f, -1.0, 2.0, 1e-12);
        let exact = (2.0f64.powi(3) + 1.0) + (2.0f64.powi(14) - 1.0) / 14.0;
        assert!((got - exact).abs() < 1e-10);
    }

    #[test]
    fn gk_adaptive_handles_peaked_integrand() {
        let f = |x: f64| (-x * x * 200.0).exp();
        let got = integrate(&f, -10.0, 10.0, 1e-12);
        let exact = (core::f64::consts::PI / 200.0).sqrt();
        assert!((got - exact).abs() < 1e-12, "got {got}, want {exact}");
    }

    #[test]
    fn gauss_hermite_moments() {
        for n in [1usize, 2, 5, 31, 64] {
            let (x, w) = gauss_hermite(n);
            let m0: f64 = w.iter().sum();
            assert!((m0 - 1.0).abs() < 1e-13, "n={n} mass {m0}");
            if n >= 2 {
                let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert!((m2 - 1.0).abs() < 1e-12, "n={n} second moment {m2}");
            }
            if n >= 3 {
                let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
                assert!((m4 - 3.0).abs() < 1e-11, "n={n} fourth moment {m4}");
            }
        }
    }

    #[test]
    fn gauss_hermite_nodes_sorted_and_symmetric() {
        let (x, _) = gauss_hermite(16);
        for i in 1..x.len() {
            assert!(x[i] > x[i - 1]);
        }
        for i in 0..8 {
            assert!((x[i] + x[15 - i]).abs() < 1e-13);
        }
    }
}
