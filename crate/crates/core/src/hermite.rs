//! Orthonormal Hermite basis of L²(γ_n).
//!
//! The one-dimensional basis is normalized so that H_0 = 1, H_1(x) = x and
//! E H_k² = 1 under γ_1, with the three-term recurrence
//! H_{k+1}(x) = (x H_k(x) - √k H_{k-1}(x)) / √(k+1)
//! and the derivative recurrence ∂H_α/∂x_i = √α_i H_{S_iα}. Multi-variate
//! basis elements are coordinate products H_α = ∏ H_{α_i}.

use crate::quad;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

/// Transforms refuse dimensions above this: tensor node counts explode.
pub const MAX_TRANSFORM_DIM: usize = 3;
/// Dense degree-graded storage cap.
pub const MAX_DEGREE: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermiteError {
    DimensionMismatch,
    UnsupportedDimension,
    DegreeTooLarge,
    /// partial-pullback check needs 0 < t < s.
    BadTimeOrder,
}

impl fmt::Display for HermiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HermiteError::DimensionMismatch => write!(f, "point dimension does not match basis"),
            HermiteError::UnsupportedDimension => {
                write!(f, "transform supports dimension <= {MAX_TRANSFORM_DIM}")
            }
            HermiteError::DegreeTooLarge => write!(f, "degree exceeds {MAX_DEGREE}"),
            HermiteError::BadTimeOrder => write!(f, "require 0 < t < s"),
        }
    }
}

/// A multi-index α ∈ N^n.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(alloc::vec![0; n])
    }

    /// e_i, the unit index in coordinate i.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = alloc::vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    /// |α| = Σ α_i.
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// S_iα, defined only when α_i > 0.
    pub fn lower(&self, i: usize) -> Option<MultiIndex> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some(MultiIndex(v))
    }
}

/// Values H_0(x), ..., H_max(x) of the normalized 1-D basis at x.
fn hermite_1d_table(max: u32, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for k in 1..max {
        let k = k as usize;
        let next =
            (x * out[k] - libm::sqrt(k as f64) * out[k - 1]) / libm::sqrt(k as f64 + 1.0);
        out.push(next);
    }
    out
}

/// H_α(x) = ∏_i H_{α_i}(x_i).
pub fn hermite_eval(alpha: &MultiIndex, x: &[f64]) -> Result<f64, HermiteError> {
    if alpha.dim() != x.len() {
        return Err(HermiteError::DimensionMismatch);
    }
    let mut prod = 1.0;
    for (&k, &xi) in alpha.0.iter().zip(x) {
        let table = hermite_1d_table(k, xi);
        prod *= table[k as usize];
    }
    Ok(prod)
}

/// A finite Hermite expansion Σ_{|α| ≤ D} c_α H_α on R^n. Missing keys are
/// zero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    dim: usize,
    degree: u32,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl HermiteExpansion {
    pub fn new(dim: usize, degree: u32) -> Self {
        HermiteExpansion {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn set_coeff(&mut self, alpha: MultiIndex, value: f64) {
        debug_assert_eq!(alpha.dim(), self.dim);
        if value == 0.0 {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(a, &c)| (a, c))
    }

    /// E of the expansion: the constant coefficient.
    pub fn mean(&self) -> f64 {
        self.coeff(&MultiIndex::zero(self.dim))
    }

    /// Parseval: E h² = Σ c_α².
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, HermiteError> {
        if x.len() != self.dim {
            return Err(HermiteError::DimensionMismatch);
        }
        // One shared 1-D table per axis, up to the max degree in that axis.
        let tables: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| hermite_1d_table(self.degree, x[i]))
            .collect();
        let mut sum = 0.0;
        for (alpha, c) in &self.coeffs {
            let mut prod = *c;
            for (i, &k) in alpha.0.iter().enumerate() {
                prod *= tables[i][k as usize];
            }
            sum += prod;
        }
        Ok(sum)
    }

    /// Gradient of the expansion at x, via ∂H_α/∂x_i = √α_i H_{S_iα}.
    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>, HermiteError> {
        if x.len() != self.dim {
            return Err(HermiteError::DimensionMismatch);
        }
        let tables: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| hermite_1d_table(self.degree, x[i]))
            .collect();
        let mut grad = alloc::vec![0.0; self.dim];
        for (alpha, c) in &self.coeffs {
            for i in 0..self.dim {
                let k = alpha.0[i];
                if k == 0 {
                    continue;
                }
                let mut prod = c * libm::sqrt(k as f64) * tables[i][k as usize - 1];
                for (j, &kj) in alpha.0.iter().enumerate() {
                    if j != i {
                        prod *= tables[j][kj as usize];
                    }
                }
                grad[i] += prod;
            }
        }
        Ok(grad)
    }

    /// Expansion of ∂/∂x_i: coefficient b_{S_iα} = √α_i c_α.
    pub fn partial_derivative(&self, i: usize) -> HermiteExpansion {
        let mut out = HermiteExpansion::new(self.dim, self.degree.saturating_sub(1));
        for (alpha, c) in &self.coeffs {
            if let Some(lowered) = alpha.lower(i) {
                let v = out.coeff(&lowered) + libm::sqrt(alpha.0[i] as f64) * c;
                out.set_coeff(lowered, v);
            }
        }
        out
    }

    /// The diagonal T_ρ action: c_α ↦ ρ^{|α|} c_α.
    pub fn apply_t_rho(&self, rho: f64) -> HermiteExpansion {
        let mut out = HermiteExpansion::new(self.dim, self.degree);
        for (alpha, c) in &self.coeffs {
            out.set_coeff(alpha.clone(), libm::pow(rho, alpha.total_degree() as f64) * c);
        }
        out
    }

    /// Ornstein-Uhlenbeck action on coefficients: P_t = T_{e^{-t}}.
    pub fn apply_p_t(&self, t: f64) -> HermiteExpansion {
        self.apply_t_rho(libm::exp(-t))
    }
}

/// Expand `f` in the Hermite basis up to total degree `degree` by tensor
/// Gauss-Hermite quadrature with `degree + 1` nodes per axis (exact for
/// integrands of polynomial degree 2·degree + 1).
pub fn hermite_transform<F>(f: F, dim: usize, degree: u32) -> Result<HermiteExpansion, HermiteError>
where
    F: Fn(&[f64]) -> f64,
{
    if dim == 0 || dim > MAX_TRANSFORM_DIM {
        return Err(HermiteError::UnsupportedDimension);
    }
    if degree > MAX_DEGREE {
        return Err(HermiteError::DegreeTooLarge);
    }
    let n_nodes = degree as usize + 1;
    let (nodes, weights) = quad::gauss_hermite(n_nodes);
    // Per-axis basis values at every node.
    let basis: Vec<Vec<f64>> = nodes.iter().map(|&x| hermite_1d_table(degree, x)).collect();

    let alphas = enumerate_multi_indices(dim, degree);
    let mut coeffs = alloc::vec![0.0; alphas.len()];

    let mut idx = alloc::vec![0usize; dim];
    let mut point = alloc::vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for (i, &j) in idx.iter().enumerate() {
            point[i] = nodes[j];
            w *= weights[j];
        }
        let fval = w * f(&point);
        if fval != 0.0 {
            for (ai, alpha) in alphas.iter().enumerate() {
                let mut h = 1.0;
                for (i, &k) in alpha.0.iter().enumerate() {
                    h *= basis[idx[i]][k as usize];
                }
                coeffs[ai] += fval * h;
            }
        }
        // odometer over the tensor grid
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] < n_nodes {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == dim {
            break;
        }
    }

    let mut out = HermiteExpansion::new(dim, degree);
    for (alpha, c) in alphas.into_iter().zip(coeffs) {
        if libm::fabs(c) > 1e-14 {
            out.set_coeff(alpha, c);
        }
    }
    Ok(out)
}

/// All α with |α| ≤ degree, in graded lexicographic order.
pub fn enumerate_multi_indices(dim: usize, degree: u32) -> Vec<MultiIndex> {
    fn rec(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == dim {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(dim, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut seen = Vec::new();
        rec(dim, d, &mut Vec::new(), &mut seen);
        out.extend(seen.into_iter().filter(|a| a.total_degree() == d));
    }
    out
}

/// The two sides of the interpolation inequality
/// E(P_t h)² ≤ (E h²)^{1-t/s} (E(P_s h)²)^{t/s}
/// for an expansion of P_s h with coefficients b_α: returns
/// (lhs, rhs) = (Σ b_α² e^{2(s-t)|α|},
///               (Σ b_α² e^{2s|α|})^{1-t/s} (Σ b_α²)^{t/s}).
pub fn partial_pullback_check(
    expansion: &HermiteExpansion,
    t: f64,
    s: f64,
) -> Result<(f64, f64), HermiteError> {
    if !(t > 0.0 && t < s) {
        return Err(HermiteError::BadTimeOrder);
    }
    let mut lhs = 0.0;
    let mut full = 0.0; // E h² = Σ b² e^{2s|α|}
    let mut base = 0.0; // E (P_s h)² = Σ b²
    for (alpha, b) in expansion.iter() {
        let d = alpha.total_degree() as f64;
        let b2 = b * b;
        lhs += b2 * libm::exp(2.0 * (s - t) * d);
        full += b2 * libm::exp(2.0 * s * d);
        base += b2;
    }
    let ratio = t / s;
    let rhs = libm::pow(full, 1.0 - ratio) * libm::pow(base, ratio);
    Ok((lhs, rhs))
}


/// Exact coefficient-level evaluation of the Poincaré-type inequality:
/// for expansions v, w and a = ½(E∇v + E∇w), returns
/// (ε(v), ε(w), rhs) with
/// ε(v) = E(v(X) - ⟨X,a⟩ - Ev)², and
/// rhs = E_ρ|∇v(X) - ∇w(Y)|² / (2(1-ρ)).
pub fn poincare_exact(
    v: &HermiteExpansion,
    w: &HermiteExpansion,
    rho: crate::gauss::Correlation,
) -> Result<(f64, f64, f64, Vec<f64>), HermiteError> {
    if v.dim() != w.dim() {
        return Err(HermiteError::DimensionMismatch);
    }
    let n = v.dim();
    let r = rho.get();

    // a_i = ½(v_{e_i} + w_{e_i}); E ∂v/∂x_i = v_{e_i}.
    let a: Vec<f64> = (0..n)
        .map(|i| {
            let e = MultiIndex::unit(n, i);
            0.5 * (v.coeff(&e) + w.coeff(&e))
        })
        .collect();

    let eps = |h: &HermiteExpansion, other: &HermiteExpansion| -> f64 {
        let mut acc = 0.0;
        for (alpha, c) in h.iter() {
            match alpha.total_degree() {
                0 => {}
                1 => {
                    let d = 0.5 * (c - other.coeff(alpha));
                    acc += d * d;
                }
                _ => acc += c * c,
            }
        }
        // degree-1 terms present only in `other`
        for (alpha, c) in other.iter() {
            if alpha.total_degree() == 1 && h.coeff(alpha) == 0.0 {
                let d = 0.5 * c;
                acc += d * d;
            }
        }
        acc
    };
    let eps_v = eps(v, w);
    let eps_w = eps(w, v);

    // E_ρ|∇v(X) - ∇w(Y)|² = Σ_i Σ_α (b_α² + c_α² - 2 ρ^{|α|} b_α c_α)
    let mut cross = 0.0;
    for i in 0..n {
        let b = v.partial_derivative(i);
        let c = w.partial_derivative(i);
        let mut keys: alloc::collections::BTreeSet<MultiIndex> =
            b.iter().map(|(a, _)| a.clone()).collect();
        keys.extend(c.iter().map(|(a, _)| a.clone()));
        for alpha in keys {
            let bb = b.coeff(&alpha);
            let cc = c.coeff(&alpha);
            cross +=
                bb * bb + cc * cc - 2.0 * libm::pow(r, alpha.total_degree() as f64) * bb * cc;
        }
    }
    let rhs = cross / (2.0 * (1.0 - r));
    Ok((eps_v, eps_w, rhs, a))
}
