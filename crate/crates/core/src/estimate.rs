//! Scalar estimates with reproducibility records.

use serde::{Deserialize, Serialize};

/// A scalar estimate with its batch-mean standard error, sample count and
/// the seed that produced it. `stderr == 0` is reserved for analytic
/// (closed-form or quadrature-exact) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_batches: u32,
    pub seed: u64,
    /// Set when an importance-sampling step degraded the effective sample
    /// size below a quarter of the nominal count.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_ess: bool,
}

impl Estimate {
    /// An analytically exact value.
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0, n_samples: 0, n_batches: 0, seed: 0, low_ess: false }
    }

    /// Estimate from per-batch means: value is their average, stderr the
    /// standard error of that average.
    pub fn from_batch_means(batch_means: &[f64], n_samples: u64, seed: u64) -> Self {
        let b = batch_means.len();
        assert!(b >= 1, "need at least one batch");
        let mean = batch_means.iter().sum::<f64>() / b as f64;
        let stderr = if b > 1 {
            let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: mean,
            stderr,
            n_samples,
            n_batches: b as u32,
            seed,
            low_ess: false,
        }
    }

    /// Delta-method push-forward through a differentiable map.
    pub fn map(&self, f: impl Fn(f64) -> f64, dfdx: impl Fn(f64) -> f64) -> Self {
        Estimate {
            value: f(self.value),
            stderr: self.stderr * dfdx(self.value).abs(),
            ..*self
        }
    }

    pub fn with_low_ess(mut self, flag: bool) -> Self {
        self.low_ess = flag;
        self
    }

    /// Half-width used by `x ± 4·stderr` style acceptance slacks.
    pub fn slack(&self, k: f64) -> f64 {
        k * self.stderr
    }
}

/// Splits `n` items into `batches` contiguous chunks (sizes differ by at
/// most one) and returns the half-open index ranges.
pub fn batch_ranges(n: usize, batches: usize) -> Vec<(usize, usize)> {
    let b = batches.max(1).min(n.max(1));
    let mut out = Vec::with_capacity(b);
    let base = n / b;
    let rem = n % b;
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < rem);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Batch means of `f` over the chunked index range, plus overall mean.
pub fn batched_mean(n: usize, batches: usize, mut term: impl FnMut(usize) -> f64) -> Vec<f64> {
    batch_ranges(n, batches)
        .into_iter()
        .map(|(a, b)| {
            let mut s = 0.0;
            for i in a..b {
                s += term(i);
            }
            s / (b - a) as f64
        })
        .collect()
}
