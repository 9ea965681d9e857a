//! Reproducible generation of ρ-correlated Gaussian vector pairs and the
//! Monte Carlo estimator scaffolding.
//!
//! Streams are counter-based (ChaCha8): a `(seed, stream_id)` pair fully
//! determines the sequence, and estimation splits work into fixed-size
//! batches, each drawing from its own derived substream. Batch boundaries
//! and the reduction order are fixed, so results are bit-identical for
//! any worker count.

use gauss_stab_core::Correlation;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Samples per batch; one RNG substream per batch.
pub const BATCH: usize = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error("sample count must be at least 2, got {0}")]
    BadCount(u64),
    #[error("evaluator returned NaN at x={x:?}, y={y:?}")]
    NanValue { x: Vec<f64>, y: Vec<f64> },
}

/// splitmix64 finalizer; mixes substream coordinates into stream ids.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A reproducible stream of ρ-correlated standard Gaussian vector pairs:
/// X ~ γ_n and Y = ρX + √(1-ρ²)Z with Z independent.
#[derive(Debug, Clone)]
pub struct GaussianPairStream {
    pub dim: usize,
    pub rho: Correlation,
    pub seed: u64,
    pub stream_id: u64,
}

impl GaussianPairStream {
    pub fn new(dim: usize, rho: Correlation, seed: u64, stream_id: u64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        GaussianPairStream {
            dim,
            rho,
            seed,
            stream_id,
        }
    }

    /// An independent derived stream; distinct `k` give statistically
    /// independent substreams.
    pub fn substream(&self, k: u64) -> Self {
        GaussianPairStream {
            stream_id: mix(self.stream_id ^ mix(k)),
            ..self.clone()
        }
    }

    /// Same stream with a different correlation (sequences then differ).
    pub fn with_rho(&self, rho: Correlation) -> Self {
        GaussianPairStream {
            rho,
            ..self.clone()
        }
    }

    fn batch_rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(self.stream_id.wrapping_add(mix(batch))));
        rng
    }

    /// Fill `x`, `y` with the next pair from `rng`.
    fn draw_into(&self, rng: &mut ChaCha8Rng, x: &mut [f64], y: &mut [f64]) {
        let rho = self.rho.get();
        let tail = (1.0 - rho * rho).sqrt();
        for i in 0..self.dim {
            let xi: f64 = rng.sample(StandardNormal);
            let zi: f64 = rng.sample(StandardNormal);
            x[i] = xi;
            y[i] = rho * xi + tail * zi;
        }
    }

    /// Materialize `count` pairs (for small counts / diagnostics).
    pub fn sample_pair(&self, count: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>, McError> {
        if count < 1 {
            return Err(McError::BadCount(count));
        }
        let mut out = Vec::with_capacity(count as usize);
        self.for_each_pair(count, |x, y| out.push((x.to_vec(), y.to_vec())));
        Ok(out)
    }

    /// Visit `count` pairs sequentially (deterministic order).
    pub fn for_each_pair<F: FnMut(&[f64], &[f64])>(&self, count: u64, mut visit: F) {
        let mut x = vec![0.0; self.dim];
        let mut y = vec![0.0; self.dim];
        let batches = count.div_ceil(BATCH as u64);
        for b in 0..batches {
            let n = (count - b * BATCH as u64).min(BATCH as u64);
            let mut rng = self.batch_rng(b);
            for _ in 0..n {
                self.draw_into(&mut rng, &mut x, &mut y);
                visit(&x, &y);
            }
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

impl McEstimate {
    /// Standard error of the difference of two estimates from
    /// independent streams.
    pub fn se_diff(&self, other: &McEstimate) -> f64 {
        (self.std_error * self.std_error + other.std_error * other.std_error).sqrt()
    }
}

struct BatchSums {
    sum: f64,
    sum_sq: f64,
    nan_at: Option<(Vec<f64>, Vec<f64>)>,
}

/// E f(X, Y) over the stream, with standard error. Parallelizes over
/// batches; the batch partition and reduction order are fixed, so the
/// result is independent of the worker count.
pub fn mc_expectation<F>(f: F, stream: &GaussianPairStream, count: u64) -> Result<McEstimate, McError>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    mc_expectation_opts(f, stream, count, false)
}

/// As `mc_expectation`; `antithetic` averages f(X,Y) with f(-X,-Y) per
/// draw (a variance-reduction option, off by default elsewhere).
pub fn mc_expectation_opts<F>(
    f: F,
    stream: &GaussianPairStream,
    count: u64,
    antithetic: bool,
) -> Result<McEstimate, McError>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if count < 2 {
        return Err(McError::BadCount(count));
    }
    let batches = count.div_ceil(BATCH as u64);
    let partials: Vec<BatchSums> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let n = (count - b * BATCH as u64).min(BATCH as u64);
            let mut rng = stream.batch_rng(b);
            let mut x = vec![0.0; stream.dim];
            let mut y = vec![0.0; stream.dim];
            let mut acc = BatchSums {
                sum: 0.0,
                sum_sq: 0.0,
                nan_at: None,
            };
            for _ in 0..n {
                stream.draw_into(&mut rng, &mut x, &mut y);
                let v = if antithetic {
                    let xm: Vec<f64> = x.iter().map(|c| -c).collect();
                    let ym: Vec<f64> = y.iter().map(|c| -c).collect();
                    0.5 * (f(&x, &y) + f(&xm, &ym))
                } else {
                    f(&x, &y)
                };
                if v.is_nan() && acc.nan_at.is_none() {
                    acc.nan_at = Some((x.clone(), y.clone()));
                }
                acc.sum += v;
                acc.sum_sq += v * v;
            }
            acc
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in &partials {
        if let Some((x, y)) = &p.nan_at {
            return Err(McError::NanValue {
                x: x.clone(),
                y: y.clone(),
            });
        }
        sum += p.sum;
        sum_sq += p.sum_sq;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(rho: f64) -> GaussianPairStream {
        GaussianPairStream::new(2, Correlation::new(rho).unwrap(), 42, 0)
    }

    #[test]
    fn reproducible_and_substreams_differ() {
        let s = stream(0.5);
        let a = s.sample_pair(10).unwrap();
        let b = s.sample_pair(10).unwrap();
        assert_eq!(a, b);
        let c = s.substream(1).sample_pair(10).unwrap();
        assert_ne!(a, c);
        assert!(s.sample_pair(0).is_err());
    }

    #[test]
    fn estimate_reduction_is_batch_partitioned() {
        // crossing a batch boundary must not perturb earlier samples
        let s = stream(0.3);
        let short = mc_expectation(|x, _| x[0], &s, BATCH as u64).unwrap();
        let long = mc_expectation(|x, _| x[0], &s, BATCH as u64 + 7).unwrap();
        // the first BATCH samples agree, so the sums differ by ≤ 7 draws
        assert!((short.mean * BATCH as f64 - long.mean * (BATCH + 7) as f64).abs() < 40.0);
    }

    #[test]
    fn marginals_and_correlation() {
        let s = GaussianPairStream::new(2, Correlation::new(0.7).unwrap(), 7, 3);
        let n = 1_000_000u64;
        let m2 = mc_expectation(|x, _| x[0] * x[0], &s, n).unwrap();
        let m4 = mc_expectation(|x, _| x[1].powi(4), &s, n).unwrap();
        let cross = mc_expectation(|x, y| x[0] * y[0], &s, n).unwrap();
        let indep = mc_expectation(|x, y| x[0] * y[1], &s, n).unwrap();
        assert!((m2.mean - 1.0).abs() < 5.0 * m2.std_error);
        assert!((m4.mean - 3.0).abs() < 5.0 * m4.std_error);
        assert!((cross.mean - 0.7).abs() < 3e-3);
        assert!(indep.mean.abs() < 5.0 * indep.std_error);
    }

    #[test]
    fn degenerate_rho_near_one() {
        let s = GaussianPairStream::new(1, Correlation::new(1.0 - 1e-8).unwrap(), 1, 0);
        let pairs = s.sample_pair(1000).unwrap();
        let tol = 5.0 * (2.0 * 1e-8f64).sqrt();
        let close = pairs
            .iter()
            .filter(|(x, y)| (x[0] - y[0]).abs() <= tol)
            .count();
        assert!(close >= 990);
    }

    #[test]
    fn constant_and_indicator_estimates() {
        let s = stream(0.5);
        let one = mc_expectation(|_, _| 1.0, &s, 10_000).unwrap();
        assert_eq!(one.mean, 1.0);
        assert_eq!(one.std_error, 0.0);
        let half = mc_expectation(|x, _| (x[0] <= 0.0) as u64 as f64, &s, 100_000).unwrap();
        assert!((half.mean - 0.5).abs() < 3.0 * half.std_error);
        // arcsin identity: Pr(X1≤0, Y1≤0) at ρ=0.5 is 1/3
        let joint = mc_expectation(
            |x, y| ((x[0] <= 0.0) && (y[0] <= 0.0)) as u64 as f64,
            &s,
            1_000_000,
        )
        .unwrap();
        assert!((joint.mean - 1.0 / 3.0).abs() < 3.0 * joint.std_error);
    }

    #[test]
    fn nan_is_reported_with_input() {
        let s = stream(0.0);
        let err = mc_expectation(|x, _| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &s, 1000);
        match err {
            Err(McError::NanValue { x, .. }) => assert!(x[0] > 0.0),
            other => panic!("expected NaN error, got {other:?}"),
        }
    }

    #[test]
    fn antithetic_reduces_variance_of_odd_functions() {
        let s = stream(0.2);
        let plain = mc_expectation_opts(|x, _| x[0], &s, 100_000, false).unwrap();
        let anti = mc_expectation_opts(|x, _| x[0], &s, 100_000, true).unwrap();
        assert_eq!(anti.mean, 0.0);
        assert!(anti.std_error <= plain.std_error);
    }
}
