//! Binomial estimates, score intervals and 3-sigma verdicts.

use core::fmt;

use libm::sqrt;

/// Two-sided 95% normal quantile used for every reported interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A point estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn exact(value: f64, trials: u64) -> Self {
        Self { value, ci_lo: value, ci_hi: value, trials }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_lo <= x && x <= self.ci_hi
    }
}

/// Count of successes out of a number of Bernoulli trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        debug_assert!(successes <= trials);
        Self { successes, trials }
    }

    pub fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += success as u64;
    }

    pub fn merge(self, other: Self) -> Self {
        Self::new(self.successes + other.successes, self.trials + other.trials)
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Plug-in standard error `sqrt(p(1-p)/n)`.
    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.rate();
        sqrt(p * (1.0 - p) / self.trials as f64)
    }

    /// Wilson score interval at 95%.
    pub fn wilson(&self) -> (f64, f64) {
        wilson(self.successes, self.trials, Z95)
    }

    pub fn estimate(&self) -> Estimate {
        let (lo, hi) = self.wilson();
        Estimate { value: self.rate(), ci_lo: lo, ci_hi: hi, trials: self.trials }
    }
}

pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// `p_a - p_b` with Newcombe's hybrid score interval (both arms Wilson).
pub fn difference(a: Proportion, b: Proportion) -> Estimate {
    let (pa, pb) = (a.rate(), b.rate());
    let (la, ua) = a.wilson();
    let (lb, ub) = b.wilson();
    let d = pa - pb;
    let lo = d - sqrt((pa - la) * (pa - la) + (ub - pb) * (ub - pb));
    let hi = d + sqrt((ua - pa) * (ua - pa) + (pb - lb) * (pb - lb));
    Estimate { value: d, ci_lo: lo, ci_hi: hi, trials: a.trials.min(b.trials) }
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            sqrt(self.variance() / self.n as f64)
        }
    }

    /// Normal-approximation 95% interval for the mean.
    pub fn estimate(&self) -> Estimate {
        let h = Z95 * self.std_err();
        Estimate { value: self.mean, ci_lo: self.mean - h, ci_hi: self.mean + h, trials: self.n }
    }
}

impl FromIterator<f64> for RunningMean {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Pearson chi-square statistic of observed counts against uniform cells.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 || counts.is_empty() {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Outcome of comparing a measurement to a reference bound at 3 sigma.
/// Asymptotic guarantees are only ever labelled, never proved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    }

    /// `measured <= bound + 3 sigma`, sigma taken at the bound.
    pub fn at_most(measured: Proportion, bound: f64) -> Self {
        let sigma = null_sigma(bound, measured.trials);
        Self::from_bool(measured.rate() <= bound + 3.0 * sigma)
    }

    /// `measured >= bound - 3 sigma`, sigma taken at the bound.
    pub fn at_least(measured: Proportion, bound: f64) -> Self {
        let sigma = null_sigma(bound, measured.trials);
        Self::from_bool(measured.rate() >= bound - 3.0 * sigma)
    }

    /// `|measured - target| <= 3 sigma`.
    pub fn near(measured: f64, target: f64, sigma: f64) -> Self {
        Self::from_bool((measured - target).abs() <= 3.0 * sigma)
    }

    pub fn is_consistent(self) -> bool {
        self == Verdict::Consistent
    }
}

/// Standard deviation of a Bernoulli(`p`) mean over `n` trials.
pub fn null_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let p = p.clamp(0.0, 1.0);
    sqrt(p * (1.0 - p) / n as f64)
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "CONSISTENT",
            Verdict::Inconsistent => "INCONSISTENT",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8 of 10, z = 1.96: (0.4902, 0.9433)
        let (lo, hi) = wilson(8, 10, Z95);
        assert!((lo - 0.490_162).abs() < 1e-5, "{lo}");
        assert!((hi - 0.943_317).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn difference_of_equal_arms_straddles_zero() {
        let e = difference(Proportion::new(40, 100), Proportion::new(40, 100));
        assert_eq!(e.value, 0.0);
        assert!(e.ci_lo < 0.0 && e.ci_hi > 0.0);
    }

    #[test]
    fn running_mean_matches_closed_form() {
        let m: RunningMean = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_of_flat_counts_is_zero() {
        assert_eq!(chi_square_uniform(&[5, 5, 5, 5]), 0.0);
        assert_eq!(chi_square_uniform(&[10, 0]), 10.0);
    }

    #[test]
    fn verdicts() {
        assert!(Verdict::at_least(Proportion::new(99, 100), 0.99).is_consistent());
        assert!(!Verdict::at_least(Proportion::new(50, 100), 0.99).is_consistent());
        assert!(Verdict::at_most(Proportion::new(0, 10), 0.0).is_consistent());
        assert!(!Verdict::at_most(Proportion::new(1, 10), 0.0).is_consistent());
    }
}
