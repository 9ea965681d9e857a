//! Monte Carlo laboratory for Gaussian noise stability: correlated-pair
//! sampling, the stability deficit and its interpolation curve, half-space
//! approximation and robustness diagnostics, and the file formats backing
//! the `gauss-stab` CLI.

pub mod bvn;
pub mod cli;
pub mod corpus;
pub mod nelder_mead;
pub mod report;
pub mod robustness;
pub mod sampling;
pub mod stability;

pub use corpus::{default_corpus, Corpus};
pub use sampling::{mc_expectation, GaussianPairStream, McEstimate};
pub use stability::{deficit, StabilityReport};
