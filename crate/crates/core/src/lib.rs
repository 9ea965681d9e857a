//! Core primitives for Gaussian noise stability computations.
//!
//! This crate is `no_std` (with `alloc`) and contains only pure,
//! deterministic numerics: the scalar normal special functions, the
//! bivariate normal CDF and the derived J/K functionals, an orthonormal
//! Hermite basis on L²(γ_n) with Gauss-Hermite transforms, and the
//! Ornstein-Uhlenbeck semigroup with its closed-form, quadrature and
//! spectral backends. Sampling, Monte Carlo estimation and the CLI live
//! in the companion `gauss-stab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod gauss;
pub mod hermite;
pub mod quad;
pub mod semigroup;

pub use gauss::{
    bvn_k, gauss_isoperimetric_i, joint_quantile_prob, k_partials, norm_cdf, norm_pdf,
    norm_quantile, Correlation, GaussError,
};
pub use hermite::{HermiteExpansion, MultiIndex};
pub use semigroup::{HalfSpace, Orientation, TestFunction, TimeParam};
