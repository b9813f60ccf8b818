//! Numeric helpers shared across the crate: compensated summation, complex
//! Gaussian sampling and batch-mean confidence intervals.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Kahan–Babuška compensated accumulator. The interference sums run over
/// hundreds of terms spanning many orders of magnitude, so naive summation
/// loses digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// One circularly-symmetric complex Gaussian sample with unit variance
/// (each part has variance 1/2).
#[inline]
pub fn crandn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_half: f64,
}

impl Estimate {
    /// Batch-means estimate: mean of per-batch values with a t-based 95% CI.
    pub fn from_batches(batch_values: &[f64]) -> Self {
        let n = batch_values.len();
        assert!(n >= 2, "need at least two batches for a CI");
        let mean = batch_values.iter().sum::<f64>() / n as f64;
        let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Estimate {
            value: mean,
            ci_half: t_quantile_975(n - 1) * (var / n as f64).sqrt(),
        }
    }

    /// Mean and CI straight from i.i.d. samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        Self::from_batches(samples)
    }

    pub fn std_err(&self, dof: usize) -> f64 {
        self.ci_half / t_quantile_975(dof)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.value - x).abs() <= self.ci_half
    }

    /// |estimate - reference| measured in CI half-widths.
    pub fn z_against(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.ci_half
    }
}

/// Two-sided 97.5% Student-t quantile, interpolated from a short table.
/// Exact quantiles are not needed: CIs here gate Monte Carlo consistency
/// checks, not inference.
pub fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [(usize, f64); 13] = [
        (1, 12.706),
        (2, 4.303),
        (3, 3.182),
        (4, 2.776),
        (5, 2.571),
        (7, 2.365),
        (10, 2.228),
        (15, 2.131),
        (19, 2.093),
        (29, 2.045),
        (49, 2.010),
        (99, 1.984),
        (199, 1.972),
    ];
    if dof >= 200 {
        return 1.96;
    }
    let mut prev = TABLE[0];
    for &(d, t) in &TABLE[1..] {
        if dof <= d {
            if dof == d {
                return t;
            }
            let f = (dof - prev.0) as f64 / (d - prev.0) as f64;
            return prev.1 + f * (t - prev.1);
        }
        prev = (d, t);
    }
    1.96
}
