//! The Ornstein-Uhlenbeck semigroup P_t and the Φ⁻¹-lifted functions v_t.
//!
//! (P_t f)(x) = E f(e^{-t} x + √(1-e^{-2t}) Z) with Z standard normal.
//! Backends: exact closed forms for half-spaces, Φ-thresholds and products
//! of axis-aligned boxes; a radial (Rice-distribution) reduction for
//! centered balls; spectral action on Hermite expansions; quadrature for
//! black boxes (tensor Gauss-Hermite for smooth kinds, nested adaptive
//! Gauss-Kronrod for indicators). Monte Carlo evaluation lives in the
//! companion crate.
//!
//! Lifted quantities are computed tail-robustly: affine kinds expose the
//! lift v_t = Φ⁻¹∘f_t exactly, and structured indicators evaluate whichever
//! of f_t and 1-f_t is small directly, so that φ(v_t) keeps relative
//! accuracy deep in the tails.

use crate::gauss::{norm_cdf, norm_pdf, norm_quantile};
use crate::hermite::HermiteExpansion;
use crate::quad;
use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

/// Lift values are clamped into [CLAMP_EPS, 1-CLAMP_EPS] before Φ⁻¹.
pub const CLAMP_EPS: f64 = 1e-14;

/// Integration cutoff for the auxiliary Gaussian variable.
const Z_TAIL: f64 = 8.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemigroupError {
    /// t must be strictly positive.
    BadTime,
    /// The requested backend does not apply to this function kind.
    MethodKindMismatch,
    /// Monte Carlo evaluation requires the sampling crate.
    MethodNeedsSampler,
    /// f_t(x) is exactly 0 or 1; the lift Φ⁻¹∘f_t is singular.
    SingularLift,
    /// pull-back hypothesis |a| ≤ k_t violated.
    NoPreimage,
    DimensionMismatch,
}

impl fmt::Display for SemigroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemigroupError::BadTime => write!(f, "time parameter must be positive"),
            SemigroupError::MethodKindMismatch => {
                write!(f, "evaluation method not applicable to this function kind")
            }
            SemigroupError::MethodNeedsSampler => {
                write!(f, "monte-carlo backend requires a sampler (see gauss-stab)")
            }
            SemigroupError::SingularLift => write!(f, "lift undefined where f_t is 0 or 1"),
            SemigroupError::NoPreimage => write!(f, "no half-space preimage: |a| > k_t"),
            SemigroupError::DimensionMismatch => write!(f, "dimension mismatch"),
        }
    }
}

/// A positive semigroup time t together with k_t = (e^{2t} - 1)^{-1/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeParam {
    t: f64,
    k_t: f64,
}

impl TimeParam {
    pub fn new(t: f64) -> Result<Self, SemigroupError> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SemigroupError::BadTime);
        }
        Ok(TimeParam {
            t,
            k_t: 1.0 / libm::sqrt(libm::expm1(2.0 * t)),
        })
    }

    #[inline]
    pub fn t(self) -> f64 {
        self.t
    }

    /// k_t = (e^{2t} - 1)^{-1/2}; strictly decreasing, k_t → ∞ as t → 0⁺.
    #[inline]
    pub fn k(self) -> f64 {
        self.k_t
    }

    /// e^{-t}
    #[inline]
    pub fn decay(self) -> f64 {
        libm::exp(-self.t)
    }

    /// √(1 - e^{-2t})
    #[inline]
    pub fn spread(self) -> f64 {
        libm::sqrt(-libm::expm1(-2.0 * self.t))
    }

    /// The time u with k_u = k, for k > 0: u = ½ log(1 + 1/k²).
    pub fn from_slope(k: f64) -> Result<Self, SemigroupError> {
        if !(k > 0.0) {
            return Err(SemigroupError::BadTime);
        }
        TimeParam::new(0.5 * libm::log1p(1.0 / (k * k)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// {x : ⟨a,x⟩ ≤ b}
    Le,
    /// {x : ⟨a,x⟩ ≥ b}
    Ge,
}

/// A half-space ⟨a,x⟩ ≤ b (or ≥ b), a ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub a: Vec<f64>,
    pub b: f64,
    pub orientation: Orientation,
}

impl HalfSpace {
    pub fn new(a: Vec<f64>, b: f64, orientation: Orientation) -> Self {
        assert!(
            a.iter().any(|&c| c != 0.0),
            "half-space normal must be nonzero"
        );
        HalfSpace { a, b, orientation }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.a.iter().map(|c| c * c).sum())
    }

    /// Signed level along the unit normal: the set is {u ≤ c} or {u ≥ c}
    /// with u = ⟨a/|a|, x⟩ and c = b/|a|.
    pub fn level(&self) -> f64 {
        self.b / self.norm()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let s: f64 = self.a.iter().zip(x).map(|(a, x)| a * x).sum();
        match self.orientation {
            Orientation::Le => s <= self.b,
            Orientation::Ge => s >= self.b,
        }
    }

    /// γ_n of the half-space: Φ(b/|a|) for ≤, Φ(-b/|a|) for ≥.
    pub fn gauss_measure(&self) -> f64 {
        match self.orientation {
            Orientation::Le => norm_cdf(self.level()),
            Orientation::Ge => norm_cdf(-self.level()),
        }
    }
}

/// A product of per-axis intervals (l_i, h_i]; bounds may be ±∞.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&l, &h))| xi > l && xi <= h)
    }

    pub fn gauss_measure(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| interval_mass(l, h))
            .product()
    }
}

/// Φ(hi) - Φ(lo), evaluated in whichever tail representation avoids
/// cancellation; relatively accurate even for intervals far in a tail.
pub fn interval_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        // upper tail: Φ(hi) - Φ(lo) = Φ(-lo) - Φ(-hi)
        (norm_cdf(-lo) - norm_cdf(-hi)).max(0.0)
    } else {
        (norm_cdf(hi) - norm_cdf(lo)).max(0.0)
    }
}

/// Disjoint axis-box partition of the complement of a disjoint box union,
/// via the grid induced by all finite breakpoints.
pub fn complement_boxes(dim: usize, boxes: &[AxisBox]) -> Vec<AxisBox> {
    // per-axis sorted breakpoints including ±∞
    let mut cuts: Vec<Vec<f64>> = alloc::vec![Vec::new(); dim];
    for i in 0..dim {
        let mut c = alloc::vec![f64::NEG_INFINITY, f64::INFINITY];
        for b in boxes {
            for &v in [b.lo[i], b.hi[i]].iter() {
                if v.is_finite() {
                    c.push(v);
                }
            }
        }
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup();
        cuts[i] = c;
    }
    let mut out = Vec::new();
    let mut idx = alloc::vec![0usize; dim];
    'cells: loop {
        // build the cell and a representative interior point
        let mut lo = alloc::vec![0.0; dim];
        let mut hi = alloc::vec![0.0; dim];
        let mut rep = alloc::vec![0.0; dim];
        for i in 0..dim {
            let (l, h) = (cuts[i][idx[i]], cuts[i][idx[i] + 1]);
            lo[i] = l;
            hi[i] = h;
            rep[i] = if l.is_finite() && h.is_finite() {
                0.5 * (l + h)
            } else if l.is_finite() {
                l + 1.0
            } else if h.is_finite() {
                h - 1.0
            } else {
                0.0
            };
        }
        if !boxes.iter().any(|b| b.contains(&rep)) {
            out.push(AxisBox { lo, hi });
        }
        // odometer
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] + 1 < cuts[carry].len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == dim {
            break 'cells;
        }
    }
    out
}

/// A dimension-tagged measurable map R^n → [0, 1].
pub enum TestFunction {
    Constant { dim: usize, value: f64 },
    /// Indicator of a half-space.
    HalfSpaceInd(HalfSpace),
    /// Φ(⟨a,x⟩ - b)
    LinearThreshold { a: Vec<f64>, b: f64 },
    /// A Hermite expansion (evaluated raw; corpus payloads are expected to
    /// stay in [0,1] up to negligible Gaussian mass).
    Hermite(HermiteExpansion),
    /// Indicator of a disjoint union of axis-aligned boxes
    /// (wedges and strips are expressed this way).
    ProductSet { dim: usize, boxes: Vec<AxisBox> },
    /// Indicator of the centered ball of the given radius (dim ≤ 2).
    BallInd { dim: usize, radius: f64 },
    /// Arbitrary evaluator with range in [0,1].
    BlackBox {
        dim: usize,
        f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
    /// Arbitrary set indicator.
    BlackBoxSet {
        dim: usize,
        pred: Box<dyn Fn(&[f64]) -> bool + Send + Sync>,
    },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Constant { dim, value } => {
                write!(f, "Constant(dim={dim}, value={value})")
            }
            TestFunction::HalfSpaceInd(h) => write!(f, "HalfSpaceInd({h:?})"),
            TestFunction::LinearThreshold { a, b } => write!(f, "LinearThreshold({a:?}, {b})"),
            TestFunction::Hermite(e) => write!(f, "Hermite(dim={}, D={})", e.dim(), e.degree()),
            TestFunction::ProductSet { dim, boxes } => {
                write!(f, "ProductSet(dim={dim}, boxes={})", boxes.len())
            }
            TestFunction::BallInd { dim, radius } => write!(f, "BallInd(dim={dim}, r={radius})"),
            TestFunction::BlackBox { dim, .. } => write!(f, "BlackBox(dim={dim})"),
            TestFunction::BlackBoxSet { dim, .. } => write!(f, "BlackBoxSet(dim={dim})"),
        }
    }
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Constant { dim, .. } => *dim,
            TestFunction::HalfSpaceInd(h) => h.dim(),
            TestFunction::LinearThreshold { a, .. } => a.len(),
            TestFunction::Hermite(e) => e.dim(),
            TestFunction::ProductSet { dim, .. } => *dim,
            TestFunction::BallInd { dim, .. } => *dim,
            TestFunction::BlackBox { dim, .. } => *dim,
            TestFunction::BlackBoxSet { dim, .. } => *dim,
        }
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value, .. } => *value,
            TestFunction::HalfSpaceInd(h) => {
                if h.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::LinearThreshold { a, b } => {
                let s: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                norm_cdf(s - b)
            }
            TestFunction::Hermite(e) => e.eval(x).unwrap_or(f64::NAN),
            TestFunction::ProductSet { boxes, .. } => {
                if boxes.iter().any(|b| b.contains(x)) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::BallInd { radius, .. } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                if r2 <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::BlackBox { f, .. } => f(x),
            TestFunction::BlackBoxSet { pred, .. } => {
                if pred(x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Evaluation clamped into [0, 1] (for kinds whose payload may stray).
    pub fn eval_unit(&self, x: &[f64]) -> f64 {
        self.eval(x).clamp(0.0, 1.0)
    }

    /// Whether this is a {0,1}-valued indicator kind.
    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            TestFunction::HalfSpaceInd(_)
                | TestFunction::ProductSet { .. }
                | TestFunction::BallInd { .. }
                | TestFunction::BlackBoxSet { .. }
        ) || matches!(self, TestFunction::Constant { value, .. } if *value == 0.0 || *value == 1.0)
    }

    /// Φ⁻¹(f(x)) with signed-infinity sentinels for indicator values.
    pub fn lift0(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::LinearThreshold { a, b } => {
                let s: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                s - b
            }
            TestFunction::Constant { value, .. } => norm_quantile(*value).unwrap_or(f64::NAN),
            _ => {
                let p = self.eval_unit(x);
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    norm_quantile(p).unwrap_or(f64::NAN)
                }
            }
        }
    }

    /// E f under γ_n, exactly, where the kind admits it.
    pub fn exact_mean(&self) -> Option<f64> {
        match self {
            TestFunction::Constant { value, .. } => Some(*value),
            TestFunction::HalfSpaceInd(h) => Some(h.gauss_measure()),
            TestFunction::LinearThreshold { a, b } => {
                let norm_sq: f64 = a.iter().map(|c| c * c).sum();
                Some(norm_cdf(-b / libm::sqrt(1.0 + norm_sq)))
            }
            TestFunction::Hermite(e) => Some(e.mean()),
            TestFunction::ProductSet { boxes, .. } => {
                Some(boxes.iter().map(|b| b.gauss_measure()).sum())
            }
            TestFunction::BallInd { dim, radius } => match dim {
                1 => Some(interval_mass(-radius, *radius)),
                2 => Some(-libm::expm1(-0.5 * radius * radius)),
                _ => None,
            },
            _ => None,
        }
    }
}

/// Evaluation backend for `Semigroup::p_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Numerical integration against the Gaussian kernel: tensor
    /// Gauss-Hermite for smooth kinds, nested adaptive Gauss-Kronrod for
    /// indicators. Trusted for dim ≤ 3.
    Quadrature,
    /// Diagonal action on Hermite coefficients (Hermite kind only).
    Spectral,
    /// Exact/structured formulas (half-space, threshold, boxes, ball, constant).
    ClosedForm,
    /// Monte Carlo; served by the companion crate's sampler.
    MonteCarlo,
}

/// Semigroup evaluator holding a shared Gauss-Hermite rule.
pub struct Semigroup {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    clamp_count: AtomicU64,
}

impl Semigroup {
    /// `nodes_per_axis` Gauss-Hermite points per dimension (64 is the
    /// trusted default for dim ≤ 3).
    pub fn new(nodes_per_axis: usize) -> Self {
        let (nodes, weights) = quad::gauss_hermite(nodes_per_axis);
        Semigroup {
            nodes,
            weights,
            clamp_count: AtomicU64::new(0),
        }
    }

    /// Number of times a lift value had to be clamped away from {0, 1}.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count.load(Ordering::Relaxed)
    }

    /// (P_t f)(x) by the requested backend.
    pub fn p_t(
        &self,
        f: &TestFunction,
        t: TimeParam,
        x: &[f64],
        method: Method,
    ) -> Result<f64, SemigroupError> {
        if x.len() != f.dim() {
            return Err(SemigroupError::DimensionMismatch);
        }
        match method {
            Method::ClosedForm => self
                .structured(f, t, x)
                .ok_or(SemigroupError::MethodKindMismatch),
            Method::Spectral => match f {
                TestFunction::Hermite(e) => Ok(e
                    .apply_p_t(t.t())
                    .eval(x)
                    .map_err(|_| SemigroupError::DimensionMismatch)?),
                _ => Err(SemigroupError::MethodKindMismatch),
            },
            Method::Quadrature => Ok(self.quadrature(f, t, x)),
            Method::MonteCarlo => Err(SemigroupError::MethodNeedsSampler),
        }
    }

    /// Best available deterministic backend: structured where the kind
    /// admits it, quadrature otherwise.
    pub fn p_t_auto(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> f64 {
        self.structured(f, t, x)
            .unwrap_or_else(|| self.quadrature(f, t, x))
    }

    /// Structured (closed-form or 1-D-reduced) evaluation of (P_t f)(x).
    pub fn structured(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> Option<f64> {
        self.structured_pair(f, t, x).map(|(p, _)| p)
    }

    /// ((P_t f)(x), 1 - (P_t f)(x)) with both sides computed to relative
    /// accuracy where the kind admits it.
    fn structured_pair(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> Option<(f64, f64)> {
        match f {
            TestFunction::Constant { value, .. } => Some((*value, 1.0 - *value)),
            TestFunction::HalfSpaceInd(_) | TestFunction::LinearThreshold { .. } => {
                let (v, _) = affine_lift(f, t, x)?;
                Some((norm_cdf(v), norm_cdf(-v)))
            }
            TestFunction::Hermite(e) => {
                let p = e.apply_p_t(t.t()).eval(x).ok()?;
                Some((p, 1.0 - p))
            }
            TestFunction::ProductSet { dim, boxes } => {
                let d = t.decay();
                let sigma = t.spread();
                let mass = |bs: &[AxisBox]| -> f64 {
                    bs.iter()
                        .map(|bx| {
                            bx.lo
                                .iter()
                                .zip(&bx.hi)
                                .enumerate()
                                .map(|(i, (&l, &h))| {
                                    let m = d * x[i];
                                    interval_mass((l - m) / sigma, (h - m) / sigma)
                                })
                                .product::<f64>()
                        })
                        .sum()
                };
                let p = mass(boxes);
                let q = mass(&complement_boxes(*dim, boxes));
                Some((p, q))
            }
            TestFunction::BallInd { dim, radius } => match dim {
                1 => {
                    let d = t.decay();
                    let sigma = t.spread();
                    let m = d * x[0];
                    let p = interval_mass((-radius - m) / sigma, (radius - m) / sigma);
                    let q = interval_mass((radius - m) / sigma, f64::INFINITY)
                        + interval_mass(f64::NEG_INFINITY, (-radius - m) / sigma);
                    Some((p, q))
                }
                2 => {
                    let mu = t.decay() * libm::sqrt(x.iter().map(|c| c * c).sum());
                    Some(ball2_pair(*radius, mu, t.spread()))
                }
                _ => None,
            },
            _ => None,
        }
    }

    /// Quadrature evaluation of E f(e^{-t}x + √(1-e^{-2t}) Z): tensor
    /// Gauss-Hermite for smooth kinds, nested adaptive Gauss-Kronrod for
    /// indicator kinds (whose discontinuities defeat fixed rules).
    pub fn quadrature(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> f64 {
        if f.is_indicator() {
            nested_expect(f, t.decay(), t.spread(), x, &Vec::new(), usize::MAX)
        } else {
            self.gh_tensor(f, t, x)
        }
    }

    fn gh_tensor(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> f64 {
        let d = t.decay();
        let sigma = t.spread();
        let n = x.len();
        let n_nodes = self.nodes.len();
        let mut idx = alloc::vec![0usize; n];
        let mut point = alloc::vec![0.0; n];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for (i, &j) in idx.iter().enumerate() {
                point[i] = d * x[i] + sigma * self.nodes[j];
                w *= self.weights[j];
            }
            acc += w * f.eval(&point);
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < n_nodes {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
        acc
    }

    /// ∇(P_t f)(x) by the Gaussian integration-by-parts identity
    /// ∇P_t f(x) = k_t E[Z f(e^{-t}x + √(1-e^{-2t}) Z)],
    /// specialised to closed forms where the kind admits them.
    pub fn grad_p_t(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> Vec<f64> {
        if let Some(g) = self.structured_grad(f, t, x) {
            return g;
        }
        if f.is_indicator() {
            let d = t.decay();
            let sigma = t.spread();
            let k = t.k();
            return (0..x.len())
                .map(|i| k * nested_expect(f, d, sigma, x, &Vec::new(), i))
                .collect();
        }
        let d = t.decay();
        let sigma = t.spread();
        let n = x.len();
        let n_nodes = self.nodes.len();
        let mut idx = alloc::vec![0usize; n];
        let mut point = alloc::vec![0.0; n];
        let mut acc = alloc::vec![0.0; n];
        loop {
            let mut w = 1.0;
            for (i, &j) in idx.iter().enumerate() {
                point[i] = d * x[i] + sigma * self.nodes[j];
                w *= self.weights[j];
            }
            let fv = w * f.eval(&point);
            if fv != 0.0 {
                for (i, &j) in idx.iter().enumerate() {
                    acc[i] += fv * self.nodes[j];
                }
            }
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < n_nodes {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
        let k = t.k();
        for a in &mut acc {
            *a *= k;
        }
        acc
    }

    fn structured_grad(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> Option<Vec<f64>> {
        match f {
            TestFunction::Constant { dim, .. } => Some(alloc::vec![0.0; *dim]),
            TestFunction::HalfSpaceInd(_) | TestFunction::LinearThreshold { .. } => {
                let (v, slope) = affine_lift(f, t, x)?;
                let scale = norm_pdf(v);
                Some(slope.iter().map(|&s| scale * s).collect())
            }
            TestFunction::Hermite(e) => e.apply_p_t(t.t()).eval_grad(x).ok(),
            TestFunction::ProductSet { boxes, dim } => {
                let d = t.decay();
                let sigma = t.spread();
                let n = *dim;
                let mut grad = alloc::vec![0.0; n];
                for bx in boxes {
                    // per-axis factor values and their x_i-derivatives
                    let mut vals = alloc::vec![0.0; n];
                    let mut ders = alloc::vec![0.0; n];
                    for (i, (&l, &h)) in bx.lo.iter().zip(&bx.hi).enumerate() {
                        let m = d * x[i];
                        vals[i] = interval_mass((l - m) / sigma, (h - m) / sigma);
                        ders[i] =
                            (-d / sigma) * (norm_pdf((h - m) / sigma) - norm_pdf((l - m) / sigma));
                    }
                    for i in 0..n {
                        let mut term = ders[i];
                        for (j, &v) in vals.iter().enumerate() {
                            if j != i {
                                term *= v;
                            }
                        }
                        grad[i] += term;
                    }
                }
                Some(grad)
            }
            TestFunction::BallInd { dim, radius } => match dim {
                1 => {
                    let d = t.decay();
                    let sigma = t.spread();
                    let m = d * x[0];
                    let der = (-d / sigma)
                        * (norm_pdf((radius - m) / sigma) - norm_pdf((-radius - m) / sigma));
                    Some(alloc::vec![der])
                }
                2 => {
                    let r = libm::sqrt(x.iter().map(|c| c * c).sum());
                    if r < 1e-12 {
                        return Some(alloc::vec![0.0; 2]);
                    }
                    let d = t.decay();
                    let mu = d * r;
                    let dp = ball2_dmu(*radius, mu, t.spread());
                    let scale = d * dp / r;
                    Some(x.iter().map(|&c| scale * c).collect())
                }
                _ => None,
            },
            _ => None,
        }
    }

    /// v_t(x) = Φ⁻¹((P_t f)(x)), clamping f_t into (0,1) when needed.
    pub fn v_t(&self, f: &TestFunction, t: TimeParam, x: &[f64]) -> Result<f64, SemigroupError> {
        if let Some((v, _)) = affine_lift(f, t, x) {
            return Ok(v);
        }
        let (p, q) = self
            .structured_pair(f, t, x)
            .unwrap_or_else(|| {
                let p = self.quadrature(f, t, x).clamp(0.0, 1.0);
                (p, 1.0 - p)
            });
        if p.is_nan() || q.is_nan() {
            return Err(SemigroupError::SingularLift);
        }
        // lift through whichever side is small, keeping relative accuracy
        if p <= q {
            let pc = p.max(CLAMP_EPS);
            if pc != p {
                self.clamp_count.fetch_add(1, Ordering::Relaxed);
            }
            norm_quantile(pc.min(1.0)).map_err(|_| SemigroupError::SingularLift)
        } else {
            let qc = q.max(CLAMP_EPS);
            if qc != q {
                self.clamp_count.fetch_add(1, Ordering::Relaxed);
            }
            Ok(-norm_quantile(qc.min(1.0)).map_err(|_| SemigroupError::SingularLift)?)
        }
    }

    /// ∇v_t(x) = ∇(P_t f)(x) / φ(v_t(x)). Satisfies |∇v_t| ≤ k_t
    /// (Gaussian-smoothed level function; affine kinds are exact).
    pub fn grad_v_t(
        &self,
        f: &TestFunction,
        t: TimeParam,
        x: &[f64],
    ) -> Result<Vec<f64>, SemigroupError> {
        if let Some((_, slope)) = affine_lift(f, t, x) {
            return Ok(slope);
        }
        let v = self.v_t(f, t, x)?;
        let density = norm_pdf(v);
        if density == 0.0 {
            return Err(SemigroupError::SingularLift);
        }
        let mut g = self.grad_p_t(f, t, x);
        for c in &mut g {
            *c /= density;
        }
        Ok(g)
    }
}

/// For kinds whose smoothed lift is exactly affine (half-space indicators
/// and Φ-thresholds): returns (v_t(x), ∇v_t), both exact.
fn affine_lift(f: &TestFunction, t: TimeParam, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    match f {
        TestFunction::HalfSpaceInd(h) => {
            let norm = h.norm();
            let u: f64 = h.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() / norm;
            let c = h.level();
            let k = t.k();
            let et = libm::exp(t.t());
            let (v, sign) = match h.orientation {
                Orientation::Le => (k * (et * c - u), -1.0),
                Orientation::Ge => (k * (u - et * c), 1.0),
            };
            let scale = sign * k / norm;
            Some((v, h.a.iter().map(|&a| scale * a).collect()))
        }
        TestFunction::LinearThreshold { a, b } => {
            let s: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
            let norm_sq: f64 = a.iter().map(|c| c * c).sum();
            let d = t.decay();
            let denom = libm::sqrt(1.0 + (1.0 - d * d) * norm_sq);
            let v = (d * s - b) / denom;
            let scale = d / denom;
            Some((v, a.iter().map(|&ai| scale * ai).collect()))
        }
        _ => None,
    }
}

/// Nested adaptive Gauss-Kronrod evaluation of
/// E[(Z_c) f(e^{-t}x + σZ)] over Z ~ γ_n (component factor Z_c included
/// when `component < n`; pass usize::MAX for the plain expectation).
fn nested_expect(
    f: &TestFunction,
    d: f64,
    sigma: f64,
    x: &[f64],
    z: &Vec<f64>,
    component: usize,
) -> f64 {
    let i = z.len();
    if i == x.len() {
        let point: Vec<f64> = x.iter().zip(z).map(|(&xi, &zi)| d * xi + sigma * zi).collect();
        return f.eval(&point);
    }
    if i + 1 == x.len() {
        // Innermost level: the integrand is {0,1}-valued and piecewise
        // constant along the line, so locate its jumps and sum exact
        // Gaussian interval masses. Quadrature rules are unreliable here:
        // a jump falling between the outermost node and the panel edge is
        // invisible to the error estimate.
        let h = |zi: f64| -> bool {
            let mut point: Vec<f64> = x
                .iter()
                .zip(z)
                .map(|(&xj, &zj)| d * xj + sigma * zj)
                .collect();
            point.push(d * x[i] + sigma * zi);
            f.eval(&point) > 0.5
        };
        return indicator_line_mass(&h, i == component);
    }
    let integrand = |zi: f64| {
        let mut z2 = z.clone();
        z2.push(zi);
        let factor = if i == component { zi } else { 1.0 };
        factor * norm_pdf(zi) * nested_expect(f, d, sigma, x, &z2, component)
    };
    // Outer levels integrate a function that carries the inner levels'
    // integration noise; their acceptance floor must sit above it.
    let remaining = x.len() - i;
    let (tol, noise) = match remaining {
        1 => (1e-13, 0.0),
        2 => (1e-11, 2e-12),
        _ => (1e-9, 2e-10),
    };
    quad::integrate_floored(&integrand, -Z_TAIL, Z_TAIL, tol, noise)
}

/// ∫ w(z) 1_{h(z)} dz over [-Z_TAIL, Z_TAIL] for a piecewise-constant
/// boolean h, with w = φ (or w = zφ when `weight_z`). Jump locations are
/// found by a uniform scan (1024 cells) refined by bisection; each
/// constant piece then contributes an exact Gaussian interval mass.
/// Features narrower than the scan resolution (~0.017 in z-units) are the
/// only blind spot.
fn indicator_line_mass(h: &dyn Fn(f64) -> bool, weight_z: bool) -> f64 {
    const CELLS: usize = 1024;
    let step = 2.0 * Z_TAIL / CELLS as f64;
    // w-mass of (l, r] given the piece value
    let piece = |l: f64, r: f64, on: bool| -> f64 {
        if !on {
            return 0.0;
        }
        if weight_z {
            // ∫_l^r z φ(z) dz = φ(l) - φ(r)
            norm_pdf(l) - norm_pdf(r)
        } else {
            interval_mass(l, r)
        }
    };
    let mut total = 0.0;
    let mut left = -Z_TAIL;
    let mut left_val = h(left);
    for c in 0..CELLS {
        let right = -Z_TAIL + (c + 1) as f64 * step;
        let right_val = h(right);
        if right_val == left_val {
            total += piece(left, right, left_val);
        } else {
            // bisect the jump to machine resolution
            let (mut lo, mut hi) = (left, right);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if h(mid) == left_val {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cut = 0.5 * (lo + hi);
            total += piece(left, cut, left_val) + piece(cut, right, right_val);
        }
        left = right;
        left_val = right_val;
    }
    total
}

/// P_t of a half-space as an exact Φ-threshold: for B = {⟨a,x⟩ ≥ b} (unit
/// direction â, level c = b/|a|), f_t(x) = Φ(k_t(⟨â,x⟩ - e^t c)), i.e. a
/// linear-threshold form with slope vector k_t â and offset k_t e^t c.
pub fn halfspace_smoothed(b: &HalfSpace, t: TimeParam) -> TestFunction {
    let norm = b.norm();
    let c = b.level();
    let k = t.k();
    let et = libm::exp(t.t());
    let (sign, offset) = match b.orientation {
        Orientation::Ge => (1.0, k * et * c),
        Orientation::Le => (-1.0, -k * et * c),
    };
    TestFunction::LinearThreshold {
        a: b.a.iter().map(|&ai| sign * k * ai / norm).collect(),
        b: offset,
    }
}

/// Invert the half-space smoothing: given f_t's exact threshold form
/// Φ(⟨a,x⟩ - b) with |a| ≤ k_t, find s ≥ 0 and the half-space B with
/// P_{t+s} 1_B = Φ(⟨a,x⟩ - b), where s solves |a| = k_{t+s}.
pub fn pull_back_halfspace(
    a: &[f64],
    b: f64,
    t: TimeParam,
) -> Result<(f64, HalfSpace), SemigroupError> {
    let norm = libm::sqrt(a.iter().map(|c| c * c).sum());
    if !(norm > 0.0) {
        return Err(SemigroupError::NoPreimage);
    }
    if norm > t.k() * (1.0 + 1e-12) {
        return Err(SemigroupError::NoPreimage);
    }
    let total = TimeParam::from_slope(norm)?; // u with k_u = |a|
    let s = (total.t() - t.t()).max(0.0);
    // Φ(⟨a,x⟩ - b) = Φ(k_u(⟨â,x⟩ - e^u c)) with c = b e^{-u}/k_u
    let c = b * libm::exp(-total.t()) / norm;
    let unit: Vec<f64> = a.iter().map(|&ai| ai / norm).collect();
    Ok((s, HalfSpace::new(unit, c, Orientation::Ge)))
}

/// (P, 1-P) for P = Pr(|Y| ≤ radius), Y ~ N(μ·e, σ² I₂): the smoothed
/// centered disc as a function of the radial offset μ. Rice-distribution
/// integrals with the exponentially scaled Bessel I₀ folded into the
/// exponent; each side integrated with a tolerance scaled to its own peak,
/// so both keep relative accuracy in the tails.
fn ball2_pair(radius: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        (u / s2)
            * libm::exp(-(u - mu) * (u - mu) / (2.0 * s2))
            * bessel_i0e(u * mu / s2)
    };
    let peak_in = g(mu.clamp(0.5 * radius, radius)).max(g(radius));
    let p = quad::integrate(&g, 0.0, radius, (peak_in * sigma * 1e-13).max(1e-280))
        .clamp(0.0, 1.0);
    let hi = (mu.max(radius) + 14.0 * sigma).max(radius + 1.0);
    let peak_out = g(mu.clamp(radius, hi)).max(g(radius));
    let q = quad::integrate(&g, radius, hi, (peak_out * sigma * 1e-13).max(1e-280))
        .clamp(0.0, 1.0);
    (p, q)
}

/// d/dμ of Pr(|Y| ≤ radius), Y ~ N(μ·e, σ² I₂), by differentiating the
/// Rice integrand: uses i0e' = i1e - i0e.
fn ball2_dmu(radius: f64, mu: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let g = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let arg = u * mu / s2;
        let e = libm::exp(-(u - mu) * (u - mu) / (2.0 * s2));
        (u / s2)
            * e
            * (bessel_i0e(arg) * (u - mu) / s2 + (u / s2) * (bessel_i1e(arg) - bessel_i0e(arg)))
    };
    let scale = {
        let s2l = s2;
        let probe = |u: f64| {
            (u / s2l) * libm::exp(-(u - mu) * (u - mu) / (2.0 * s2l)) / s2l
        };
        probe(mu.clamp(0.5 * radius, radius)).max(probe(radius))
    };
    quad::integrate(&g, 0.0, radius, (scale * sigma * 1e-13).max(1e-280))
}

/// e^{-x} I₀(x), x ≥ 0: positive power series below 30 (no cancellation),
/// asymptotic expansion above; relative accuracy ~1e-11 or better.
fn bessel_i0e(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 0.0f64;
        while term > 1e-18 * sum {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
        }
        sum * libm::exp(-x)
    } else {
        // I₀ ~ e^x/√(2πx) Σ_k ((2k-1)!!)²/(k! (8x)^k)
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 0..8u32 {
            let odd = (2 * k + 1) as f64;
            term *= odd * odd / ((k as f64 + 1.0) * 8.0 * x);
            sum += term;
        }
        sum / libm::sqrt(2.0 * core::f64::consts::PI * x)
    }
}

/// e^{-x} I₁(x), x ≥ 0, same scheme as `bessel_i0e`.
fn bessel_i1e(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        let q = 0.25 * x * x;
        let mut term = 0.5 * x;
        let mut sum = term;
        let mut k = 0.0f64;
        if term == 0.0 {
            return 0.0;
        }
        while term > 1e-18 * sum {
            k += 1.0;
            term *= q / (k * (k + 1.0));
            sum += term;
        }
        sum * libm::exp(-x)
    } else {
        // a_{k+1}/a_k = -(4 - (2k+1)²)/(8x(k+1))
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 0..8u32 {
            let odd = (2 * k + 1) as f64;
            term *= -(4.0 - odd * odd) / (8.0 * x * (k as f64 + 1.0));
            sum += term;
        }
        sum / libm::sqrt(2.0 * core::f64::consts::PI * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sg() -> Semigroup {
        Semigroup::new(64)
    }

    /// The two-piece set {x_1 < 2, x_2 < 0} ∪ {x_1 < 1, x_2 ≥ 0}.
    fn two_piece_wedge() -> TestFunction {
        TestFunction::ProductSet {
            dim: 2,
            boxes: alloc::vec![
                AxisBox {
                    lo: alloc::vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                    hi: alloc::vec![2.0, 0.0],
                },
                AxisBox {
                    lo: alloc::vec![f64::NEG_INFINITY, 0.0],
                    hi: alloc::vec![1.0, f64::INFINITY],
                },
            ],
        }
    }

    #[test]
    fn time_param_basics() {
        assert!(TimeParam::new(0.0).is_err());
        assert!(TimeParam::new(-1.0).is_err());
        assert!(TimeParam::new(f64::NAN).is_err());
        // k_{log 2} = 1/√(4-1) = 1/√3
        let t = TimeParam::new(libm::log(2.0)).unwrap();
        assert!((t.k() - 1.0 / libm::sqrt(3.0)).abs() < 1e-15);
        // strictly decreasing
        let mut prev = f64::INFINITY;
        for &tt in &[0.01, 0.1, 0.5, 1.0, 3.0] {
            let k = TimeParam::new(tt).unwrap().k();
            assert!(k < prev);
            prev = k;
        }
        // from_slope inverts k
        let back = TimeParam::from_slope(t.k()).unwrap();
        assert!((back.t() - t.t()).abs() < 1e-12);
    }

    #[test]
    fn halfspace_measure() {
        let h = HalfSpace::new(alloc::vec![2.0, 0.0], 2.0, Orientation::Le);
        // {2x_1 ≤ 2} = {x_1 ≤ 1}: measure Φ(1)
        assert!((h.gauss_measure() - norm_cdf(1.0)).abs() < 1e-15);
        let g = HalfSpace::new(alloc::vec![0.0, -1.0], 0.5, Orientation::Ge);
        assert!((g.gauss_measure() - norm_cdf(-0.5)).abs() < 1e-15);
        assert!(h.contains(&[0.9, 7.0]));
        assert!(!h.contains(&[1.1, 0.0]));
    }

    #[test]
    fn complement_partition_is_exact() {
        let wedge = match two_piece_wedge() {
            TestFunction::ProductSet { boxes, .. } => boxes,
            _ => unreachable!(),
        };
        let comp = complement_boxes(2, &wedge);
        let direct: f64 = wedge.iter().map(|b| b.gauss_measure()).sum();
        let complement: f64 = comp.iter().map(|b| b.gauss_measure()).sum();
        assert!((direct + complement - 1.0).abs() < 1e-12);
        // no overlap with the original set on a grid of probe points
        for i in -8..=8 {
            for j in -8..=8 {
                let x = [i as f64 * 0.45, j as f64 * 0.45];
                let in_set = wedge.iter().any(|b| b.contains(&x));
                let in_comp = comp.iter().any(|b| b.contains(&x));
                assert!(in_set != in_comp, "{x:?}");
            }
        }
    }

    #[test]
    fn p_t_halfspace_closed_form_is_phi_ktx() {
        // f = 1_{x_1 ≥ 0}: (P_t f)(x) = Φ(k_t x_1) exactly
        let f = TestFunction::HalfSpaceInd(HalfSpace::new(
            alloc::vec![1.0, 0.0],
            0.0,
            Orientation::Ge,
        ));
        let s = sg();
        let t = TimeParam::new(0.5).unwrap();
        for x1 in [-2.0, -0.3, 0.0, 1.7] {
            let got = s.p_t(&f, t, &[x1, 0.4], Method::ClosedForm).unwrap();
            assert!((got - norm_cdf(t.k() * x1)).abs() < 1e-15, "x1={x1}");
        }
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let s = sg();
        let t = TimeParam::new(0.4).unwrap();
        let x = [0.3, -0.8];
        let cases: alloc::vec::Vec<TestFunction> = alloc::vec![
            TestFunction::HalfSpaceInd(HalfSpace::new(
                alloc::vec![1.0, -0.5],
                0.2,
                Orientation::Le,
            )),
            TestFunction::LinearThreshold {
                a: alloc::vec![0.7, 1.1],
                b: -0.3,
            },
            two_piece_wedge(),
            TestFunction::ProductSet {
                dim: 2,
                boxes: alloc::vec![AxisBox {
                    lo: alloc::vec![-0.5, f64::NEG_INFINITY],
                    hi: alloc::vec![1.0, f64::INFINITY],
                }],
            },
            TestFunction::Constant { dim: 2, value: 0.37 },
        ];
        for f in &cases {
            let closed = s.p_t(f, t, &x, Method::ClosedForm).unwrap();
            let quad = s.p_t(f, t, &x, Method::Quadrature).unwrap();
            assert!((closed - quad).abs() < 1e-8, "{f:?}: {closed} vs {quad}");
        }
    }

    #[test]
    fn ball_smoothing_against_quadrature() {
        let s = sg();
        let f = TestFunction::BallInd { dim: 2, radius: 1.2 };
        let t = TimeParam::new(0.6).unwrap();
        for x in [[0.0, 0.0], [0.5, -0.5], [1.5, 0.3]] {
            let closed = s.p_t(&f, t, &x, Method::ClosedForm).unwrap();
            let quad = s.p_t(&f, t, &x, Method::Quadrature).unwrap();
            assert!((closed - quad).abs() < 1e-7, "{x:?}: {closed} vs {quad}");
        }
        // at the center the Rice integral degenerates to a Rayleigh mass
        let t2 = TimeParam::new(0.6).unwrap();
        let sigma2 = t2.spread() * t2.spread();
        let center = s.p_t(&f, t2, &[0.0, 0.0], Method::ClosedForm).unwrap();
        let rayleigh = -libm::expm1(-1.44 / (2.0 * sigma2));
        assert!((center - rayleigh).abs() < 1e-12);
        // p and q are complementary
        let (p, q) = s.structured_pair(&f, t, &[0.7, -0.2]).unwrap();
        assert!((p + q - 1.0).abs() < 1e-10);
        // exact mean: 1 - e^{-r²/2}
        assert!((f.exact_mean().unwrap() - (1.0 - libm::exp(-0.72))).abs() < 1e-15);
    }

    #[test]
    fn bessel_scaled_values() {
        // I0(1) = 1.2660658777520084, I1(1) = 0.5651591039924851
        let e = libm::exp(-1.0);
        assert!((bessel_i0e(1.0) - 1.2660658777520084 * e).abs() < 1e-12);
        assert!((bessel_i1e(1.0) - 0.5651591039924851 * e).abs() < 1e-12);
        // large-argument asymptotics stay finite and positive
        for &x in &[35.0, 100.0, 1e4] {
            let v0 = bessel_i0e(x);
            let v1 = bessel_i1e(x);
            assert!(v0 > 0.0 && v0 < 1.0);
            assert!(v1 > 0.0 && v1 < v0);
        }
        // frozen references on both sides of the series/asymptotic switch
        assert!((bessel_i0e(29.9) - 0.07326921904600191).abs() < 1e-12);
        assert!((bessel_i1e(29.9) - 0.0720333749118688).abs() < 1e-12);
        assert!((bessel_i0e(30.1) - 0.07302329413106094).abs() < 1e-12);
        assert!((bessel_i1e(30.1) - 0.07179985435101434).abs() < 1e-12);
    }

    #[test]
    fn spectral_action_on_hermite_kind() {
        let e = crate::hermite::hermite_transform(|x: &[f64]| 0.5 + 0.1 * x[0] * x[0], 1, 2)
            .unwrap();
        let f = TestFunction::Hermite(e);
        let s = sg();
        let t = TimeParam::new(0.8).unwrap();
        for x in [[-1.0], [0.2], [2.0]] {
            let spectral = s.p_t(&f, t, &x, Method::Spectral).unwrap();
            let quad = s.p_t(&f, t, &x, Method::Quadrature).unwrap();
            assert!((spectral - quad).abs() < 1e-10);
        }
        // spectral on a non-Hermite kind is a configuration error
        let c = TestFunction::Constant { dim: 1, value: 0.5 };
        assert_eq!(
            s.p_t(&c, t, &[0.0], Method::Spectral).unwrap_err(),
            SemigroupError::MethodKindMismatch
        );
        assert_eq!(
            s.p_t(&c, t, &[0.0], Method::MonteCarlo).unwrap_err(),
            SemigroupError::MethodNeedsSampler
        );
    }

    #[test]
    fn ergodic_and_small_time_limits() {
        let s = sg();
        let f = TestFunction::LinearThreshold {
            a: alloc::vec![1.3],
            b: 0.4,
        };
        let x = [0.9];
        // t → ∞: P_t f → E f
        let big = TimeParam::new(10.0).unwrap();
        let mean = f.exact_mean().unwrap();
        assert!((s.p_t_auto(&f, big, &x) - mean).abs() < 1e-3);
        // t → 0⁺: P_t f → f
        let small = TimeParam::new(1e-8).unwrap();
        assert!((s.p_t_auto(&f, small, &x) - f.eval(&x)).abs() < 1e-4);
    }

    #[test]
    fn semigroup_law_on_thresholds() {
        // closed forms: P_s (P_t 1_B) = P_{t+s} 1_B
        let b = HalfSpace::new(alloc::vec![0.8, -0.6], 0.3, Orientation::Ge);
        let t = TimeParam::new(0.35).unwrap();
        let s_time = TimeParam::new(0.9).unwrap();
        let total = TimeParam::new(t.t() + s_time.t()).unwrap();
        let smoothed = halfspace_smoothed(&b, t);
        let sgv = sg();
        let ind = TestFunction::HalfSpaceInd(b);
        for x in [[0.0, 0.0], [1.0, -2.0], [-0.4, 0.7]] {
            let two_step = sgv.p_t(&smoothed, s_time, &x, Method::ClosedForm).unwrap();
            let one_step = sgv.p_t(&ind, total, &x, Method::ClosedForm).unwrap();
            assert!((two_step - one_step).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn halfspace_smoothed_examples() {
        let sgv = sg();
        // B = {x_1 ≤ 0}: f_t(x) = Φ(-k_t x_1), slope magnitude k_t, offset 0
        let b = HalfSpace::new(alloc::vec![1.0], 0.0, Orientation::Le);
        let t = TimeParam::new(0.5).unwrap();
        match halfspace_smoothed(&b, t) {
            TestFunction::LinearThreshold { a, b: off } => {
                assert!((a[0] + t.k()).abs() < 1e-15);
                assert_eq!(off, 0.0);
            }
            other => panic!("wrong kind {other:?}"),
        }
        // B = {x_1 ≤ 1}, t = log 2: slope k_t = 1/√3, offset e^t·1 = 2,
        // f_t(x) = Φ((2 - x_1)/√3)
        let b = HalfSpace::new(alloc::vec![1.0], 1.0, Orientation::Le);
        let t = TimeParam::new(libm::log(2.0)).unwrap();
        let f = halfspace_smoothed(&b, t);
        let ind = TestFunction::HalfSpaceInd(b.clone());
        for x1 in [-1.0, 0.0, 2.0, 3.5] {
            let want = norm_cdf((2.0 - x1) / libm::sqrt(3.0));
            assert!((f.eval(&[x1]) - want).abs() < 1e-14, "x1={x1}");
            // matches the quadrature smoothing of the indicator to 1e-8
            let via_quad = sgv.p_t(&ind, t, &[x1], Method::Quadrature).unwrap();
            assert!((f.eval(&[x1]) - via_quad).abs() < 1e-8);
        }
        // t → ∞: tends to the constant γ(B)
        let late = TimeParam::new(12.0).unwrap();
        let f = halfspace_smoothed(&b, late);
        assert!((f.eval(&[0.3]) - b.gauss_measure()).abs() < 1e-4);
    }

    #[test]
    fn v_t_of_threshold_is_affine_with_bounded_slope() {
        let sgv = sg();
        let a_vec = alloc::vec![1.5, -0.7];
        let norm = libm::sqrt(1.5f64 * 1.5 + 0.7 * 0.7);
        let f = TestFunction::LinearThreshold {
            a: a_vec.clone(),
            b: 0.2,
        };
        let t = TimeParam::new(0.3).unwrap();
        let d = t.decay();
        let slope = norm * d / libm::sqrt(1.0 + (1.0 - d * d) * norm * norm);
        assert!(slope <= t.k());
        // gradient magnitude equals the closed-form slope, everywhere
        for x in [[0.0, 0.0], [1.0, 1.0], [-2.0, 0.5]] {
            let g = sgv.grad_v_t(&f, t, &x).unwrap();
            let gnorm = libm::sqrt(g.iter().map(|c| c * c).sum());
            assert!((gnorm - slope).abs() < 1e-12, "{x:?}: {gnorm} vs {slope}");
            // affine: v_t differences match the gradient exactly
            let v0 = sgv.v_t(&f, t, &x).unwrap();
            let xh = [x[0] + 0.1, x[1]];
            let v1 = sgv.v_t(&f, t, &xh).unwrap();
            assert!(((v1 - v0) / 0.1 - g[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_bound_sharp_for_halfspace() {
        // f = 1_{x_1 ≥ 0}: |∇v_t| = k_t everywhere
        let sgv = sg();
        let f = TestFunction::HalfSpaceInd(HalfSpace::new(
            alloc::vec![1.0],
            0.0,
            Orientation::Ge,
        ));
        for &tt in &[0.1, 0.5, 2.0] {
            let t = TimeParam::new(tt).unwrap();
            for x1 in [-1.3, 0.0, 0.6, 2.0] {
                let g = sgv.grad_v_t(&f, t, &[x1]).unwrap();
                assert!((g[0].abs() - t.k()).abs() < 1e-12, "t={tt} x={x1}");
            }
        }
    }

    #[test]
    fn gradient_bound_on_structured_kinds() {
        let sgv = sg();
        let wedge = two_piece_wedge();
        let ball = TestFunction::BallInd { dim: 2, radius: 1.0 };
        // a deterministic scattering of points
        let points: alloc::vec::Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.618;
                [2.5 * libm::sin(7.0 * a), 2.5 * libm::cos(3.0 * a + 1.0)]
            })
            .collect();
        for f in [&wedge, &ball] {
            for &tt in &[0.1, 0.5, 2.0] {
                let t = TimeParam::new(tt).unwrap();
                for x in &points {
                    let g = sgv.grad_v_t(f, t, x).unwrap();
                    let gnorm = libm::sqrt(g.iter().map(|c| c * c).sum());
                    assert!(
                        gnorm <= t.k() + 1e-6,
                        "{f:?} t={tt} x={x:?}: {gnorm} > {}",
                        t.k()
                    );
                }
            }
        }
    }

    #[test]
    fn grad_p_t_quadrature_agrees_with_structured() {
        let sgv = sg();
        let f = TestFunction::LinearThreshold {
            a: alloc::vec![0.9, 0.4],
            b: -0.1,
        };
        let smooth_box = TestFunction::BlackBox {
            dim: 2,
            f: Box::new(|x: &[f64]| norm_cdf(0.9 * x[0] + 0.4 * x[1] + 0.1)),
        };
        let t = TimeParam::new(0.7).unwrap();
        let x = [0.4, -1.1];
        let exact = sgv.grad_p_t(&f, t, &x);
        let via_quadrature = sgv.grad_p_t(&smooth_box, t, &x);
        for i in 0..2 {
            assert!((exact[i] - via_quadrature[i]).abs() < 1e-8, "i={i}");
        }
    }

    #[test]
    fn indicator_gradient_quadrature_agrees_with_structured() {
        // black-box indicator of the same wedge must reproduce the
        // structured gradient through the adaptive Z·f identity
        let sgv = sg();
        let wedge = two_piece_wedge();
        let blackbox = TestFunction::BlackBoxSet {
            dim: 2,
            pred: Box::new(|x: &[f64]| {
                (x[0] < 2.0 && x[1] < 0.0) || (x[0] < 1.0 && x[1] >= 0.0)
            }),
        };
        let t = TimeParam::new(0.5).unwrap();
        let x = [0.6, -0.2];
        let gs = sgv.grad_p_t(&wedge, t, &x);
        let gq = sgv.grad_p_t(&blackbox, t, &x);
        for i in 0..2 {
            assert!((gs[i] - gq[i]).abs() < 1e-7, "i={i}: {} vs {}", gs[i], gq[i]);
        }
        let ps = sgv.p_t_auto(&wedge, t, &x);
        let pq = sgv.quadrature(&blackbox, t, &x);
        assert!((ps - pq).abs() < 1e-8);
    }

    #[test]
    fn pull_back_halfspace_round_trip() {
        let t = TimeParam::new(0.4).unwrap();
        // |a| = k_{2t} → s = t
        let k2t = TimeParam::new(0.8).unwrap().k();
        let a = alloc::vec![0.6 * k2t, 0.8 * k2t];
        let (s, b) = pull_back_halfspace(&a, 0.3, t).unwrap();
        assert!((s - 0.4).abs() < 1e-10);
        // re-smooth at t + s and compare to the given threshold
        let total = TimeParam::new(t.t() + s).unwrap();
        let back = halfspace_smoothed(&b, total);
        let f = TestFunction::LinearThreshold { a: a.clone(), b: 0.3 };
        for x in [[0.0, 0.0], [1.0, -0.5], [-2.0, 2.0]] {
            assert!((back.eval(&x) - f.eval(&x)).abs() < 1e-8, "{x:?}");
        }
        // |a| = k_t boundary → s = 0
        let a = alloc::vec![t.k()];
        let (s, _) = pull_back_halfspace(&a, 0.0, t).unwrap();
        assert!(s.abs() < 1e-9);
        // |a| = 1 > k_{log 2} = 1/√3 → no preimage
        let t = TimeParam::new(libm::log(2.0)).unwrap();
        assert_eq!(
            pull_back_halfspace(&[1.0], 0.0, t).unwrap_err(),
            SemigroupError::NoPreimage
        );
    }

    #[test]
    fn contraction_and_range() {
        let sgv = sg();
        let f = two_piece_wedge();
        let t = TimeParam::new(0.25).unwrap();
        for x in [[0.0, 0.0], [3.0, -3.0], [-1.0, 1.0]] {
            let p = sgv.p_t_auto(&f, t, &x);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn lift_clamps_and_counts() {
        let sgv = sg();
        // a strip far from the evaluation point: f_t underflows to 0
        let strip = TestFunction::ProductSet {
            dim: 1,
            boxes: alloc::vec![AxisBox {
                lo: alloc::vec![-1.0],
                hi: alloc::vec![1.0],
            }],
        };
        let t = TimeParam::new(0.5).unwrap();
        let v = sgv.v_t(&strip, t, &[40.0]).unwrap();
        assert!(v.is_finite() && v < -7.0);
        assert!(sgv.clamp_count() >= 1);
        // moderate tail: no clamp, relative accuracy maintained
        let before = sgv.clamp_count();
        let v = sgv.v_t(&strip, t, &[5.0]).unwrap();
        assert!(v.is_finite() && v < 0.0);
        assert_eq!(sgv.clamp_count(), before);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn mass_conservation_closed_forms(
            a1 in -1.5f64..1.5,
            b in -1.0f64..1.0,
            tt in 0.05f64..2.0,
        ) {
            // E(P_t f) = E f, computed by 1-D quadrature of the closed form
            prop_assume!(a1.abs() > 0.05);
            let f = TestFunction::LinearThreshold { a: alloc::vec![a1], b };
            let t = TimeParam::new(tt).unwrap();
            let sgv = Semigroup::new(64);
            let mean_smoothed: f64 = {
                let (nodes, weights) = crate::quad::gauss_hermite(64);
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * sgv.p_t_auto(&f, t, &[x]))
                    .sum()
            };
            prop_assert!((mean_smoothed - f.exact_mean().unwrap()).abs() < 1e-8);
        }

        #[test]
        fn gradient_bound_thresholds(
            a1 in -2.0f64..2.0,
            a2 in -2.0f64..2.0,
            b in -1.0f64..1.0,
            tt in 0.05f64..2.5,
            x1 in -2.0f64..2.0,
            x2 in -2.0f64..2.0,
        ) {
            prop_assume!(a1.abs() + a2.abs() > 0.1);
            let f = TestFunction::LinearThreshold { a: alloc::vec![a1, a2], b };
            let t = TimeParam::new(tt).unwrap();
            let sgv = Semigroup::new(16);
            let g = sgv.grad_v_t(&f, t, &[x1, x2]).unwrap();
            let gnorm = libm::sqrt(g.iter().map(|c| c * c).sum());
            prop_assert!(gnorm <= t.k() + 1e-6);
        }
    }
}
