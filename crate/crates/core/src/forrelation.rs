//! Forrelation instances: samplers, the forrelation value and the
//! two-query quantum test.
//!
//! For `F = (-1)^f`, `G = (-1)^g` on `{0,1}^ell`,
//! `Phi(f, g) = 2^{-3 ell / 2} sum_{x,y} F(x) (-1)^{x.y} G(y)`.

use alloc::vec::Vec;
use core::fmt;

use libm::{log, pow, sqrt};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::bits::TruthTable;
use crate::quantum::{run_query_algorithm, BitOracle, QueryProgram};
use crate::rng::rng_from_seed;
use crate::walsh::fwht;
use crate::{Error, Result};

/// Largest domain exponent accepted by the samplers.
pub const MAX_SAMPLER_ELL: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Provenance {
    Uniform = 0,
    GaussianForrelated = 1,
    ExactForrelated = 2,
}

impl Provenance {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Uniform),
            1 => Some(Self::GaussianForrelated),
            2 => Some(Self::ExactForrelated),
            _ => None,
        }
    }

    pub fn is_forrelated(self) -> bool {
        self != Self::Uniform
    }
}

/// A pair `(f, g)` over the same domain. Serialised as `f` then `g`,
/// `L = 2^{ell+1}` bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ForrelationInstance {
    f: TruthTable,
    g: TruthTable,
    provenance: Provenance,
}

impl ForrelationInstance {
    pub fn new(f: TruthTable, g: TruthTable, provenance: Provenance) -> Result<Self> {
        if f.ell() != g.ell() {
            return Err(Error::LengthMismatch { expected: f.len(), got: g.len() });
        }
        Ok(Self { f, g, provenance })
    }

    pub fn f(&self) -> &TruthTable {
        &self.f
    }

    pub fn g(&self) -> &TruthTable {
        &self.g
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn ell(&self) -> u32 {
        self.f.ell()
    }

    /// Serialised length `L`.
    pub fn block_len(&self) -> usize {
        2 * self.f.len()
    }

    /// Bit `y` of the serialised string `f || g`.
    pub fn bit(&self, y: usize) -> bool {
        let half = self.f.len();
        if y < half {
            self.f.get(y)
        } else {
            self.g.get(y - half)
        }
    }
}

impl BitOracle for ForrelationInstance {
    fn len(&self) -> usize {
        self.block_len()
    }
    fn bit(&self, position: usize) -> bool {
        ForrelationInstance::bit(self, position)
    }
}

impl fmt::Debug for ForrelationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForrelationInstance")
            .field("provenance", &self.provenance)
            .field("f", &self.f)
            .field("g", &self.g)
            .finish()
    }
}

/// Which Forrelated distribution fills blocks whose pattern bit is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForrelatedSampler {
    /// Gaussian rounding with covariance strength `eps`; `None` selects
    /// [`default_epsilon`].
    Gaussian { eps: Option<f64> },
    /// `g` is the sign pattern of `f`'s Walsh–Hadamard spectrum.
    Exact,
}

impl ForrelatedSampler {
    pub fn provenance(self) -> Provenance {
        match self {
            Self::Gaussian { .. } => Provenance::GaussianForrelated,
            Self::Exact => Provenance::ExactForrelated,
        }
    }

    pub fn sample<R: RngCore + ?Sized>(self, ell: u32, rng: &mut R) -> Result<ForrelationInstance> {
        match self {
            Self::Gaussian { eps } => {
                gaussian_forrelated_with(ell, eps.unwrap_or_else(|| default_epsilon(ell)), rng)
            }
            Self::Exact => exact_forrelated_with(ell, rng),
        }
    }

    /// A block for pattern bit `forrelated`: this sampler when set, uniform
    /// otherwise.
    pub fn sample_block<R: RngCore + ?Sized>(
        self,
        forrelated: bool,
        ell: u32,
        rng: &mut R,
    ) -> Result<ForrelationInstance> {
        if forrelated {
            self.sample(ell, rng)
        } else {
            uniform_with(ell, rng)
        }
    }
}

/// `1 / (24 ln L)` with `L = 2^{ell+1}`.
pub fn default_epsilon(ell: u32) -> f64 {
    1.0 / (24.0 * (ell as f64 + 1.0) * core::f64::consts::LN_2)
}

fn check_ell(ell: u32) -> Result<()> {
    if ell > MAX_SAMPLER_ELL {
        Err(Error::EllOutOfRange { ell, max: MAX_SAMPLER_ELL })
    } else {
        Ok(())
    }
}

pub fn sample_uniform_instance(ell: u32, seed: u64) -> Result<ForrelationInstance> {
    uniform_with(ell, &mut rng_from_seed(seed))
}

pub fn uniform_with<R: RngCore + ?Sized>(ell: u32, rng: &mut R) -> Result<ForrelationInstance> {
    check_ell(ell)?;
    let f = TruthTable::random(ell, rng)?;
    let g = TruthTable::random(ell, rng)?;
    ForrelationInstance::new(f, g, Provenance::Uniform)
}

pub fn sample_gaussian_forrelated(ell: u32, eps: f64, seed: u64) -> Result<ForrelationInstance> {
    gaussian_forrelated_with(ell, eps, &mut rng_from_seed(seed))
}

/// Draws `x ~ N(0, eps I)` on `2^ell` coordinates, sets `y = H x` with the
/// orthonormal Hadamard matrix, clips `(x, y)` to `[-1, 1]` and rounds each
/// coordinate `z` to bit 1 with probability `(1 + z) / 2`. `x` yields `f`,
/// `y` yields `g`.
pub fn gaussian_forrelated_with<R: RngCore + ?Sized>(
    ell: u32,
    eps: f64,
    rng: &mut R,
) -> Result<ForrelationInstance> {
    check_ell(ell)?;
    if ell == 0 {
        return Err(Error::InvalidParameter("gaussian sampler needs ell >= 1"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidEpsilon);
    }
    let n = 1usize << ell;
    let sd = sqrt(eps);
    let x: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut y = x.clone();
    fwht(&mut y);
    let norm = 1.0 / sqrt(n as f64);
    let mut round = |z: f64| {
        let z = z.clamp(-1.0, 1.0);
        rng.random::<f64>() < (1.0 + z) / 2.0
    };
    let mut f = TruthTable::zeros(ell)?;
    let mut g = TruthTable::zeros(ell)?;
    for (i, &v) in x.iter().enumerate().take(n) {
        f.set(i, round(v));
    }
    for (i, &v) in y.iter().enumerate().take(n) {
        g.set(i, round(v * norm));
    }
    ForrelationInstance::new(f, g, Provenance::GaussianForrelated)
}

pub fn sample_exact_forrelated(ell: u32, seed: u64) -> Result<ForrelationInstance> {
    exact_forrelated_with(ell, &mut rng_from_seed(seed))
}

pub fn exact_forrelated_with<R: RngCore + ?Sized>(
    ell: u32,
    rng: &mut R,
) -> Result<ForrelationInstance> {
    check_ell(ell)?;
    if ell == 0 {
        return Err(Error::InvalidParameter("exact sampler needs ell >= 1"));
    }
    let f = TruthTable::random(ell, rng)?;
    let g = spectral_sign(&f);
    ForrelationInstance::new(f, g, Provenance::ExactForrelated)
}

/// `g(y) = 1` iff the `y`-th Walsh–Hadamard coefficient of `(-1)^f` is
/// negative. Zero coefficients map to 0.
pub fn spectral_sign(f: &TruthTable) -> TruthTable {
    let mut spec = f.signs();
    fwht(&mut spec);
    TruthTable::from_fn(f.ell(), |y| spec[y] < 0).expect("same ell as f")
}

/// Exact forrelation value via the fast transform.
pub fn forrelation_value(inst: &ForrelationInstance) -> f64 {
    let mut spec = inst.f.signs();
    fwht(&mut spec);
    let sum: i64 = spec
        .iter()
        .zip(inst.g.iter())
        .map(|(&c, gy)| if gy { -c } else { c })
        .sum();
    sum as f64 * pow(2.0, -1.5 * inst.ell() as f64)
}

/// Single-run acceptance probability of the forrelation circuit, obtained by
/// statevector simulation.
pub fn acceptance_probability(inst: &ForrelationInstance) -> f64 {
    let program = QueryProgram::forrelation(inst.ell() as usize);
    let run = run_query_algorithm(&program, inst).expect("forrelation program fits its instance");
    run.probability_of(0)
}

/// Runs the forrelation circuit `repetitions` times and measures; returns the
/// number of runs that landed on `|0^ell>`.
pub fn count_acceptances<R: RngCore + ?Sized>(
    inst: &ForrelationInstance,
    repetitions: u32,
    rng: &mut R,
) -> u32 {
    let p = acceptance_probability(inst);
    (0..repetitions).filter(|_| rng.random::<f64>() < p).count() as u32
}

/// Outputs 1 iff the acceptance frequency over `repetitions` runs reaches
/// `threshold`.
pub fn quantum_forrelation_test<R: RngCore + ?Sized>(
    inst: &ForrelationInstance,
    repetitions: u32,
    threshold: f64,
    rng: &mut R,
) -> Result<bool> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be at least 1"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter("threshold must lie in (0, 1)"));
    }
    let hits = count_acceptances(inst, repetitions, rng);
    Ok(hits as f64 >= threshold * repetitions as f64)
}

/// Midpoint between the expected acceptance probabilities of uniform
/// (`2^{-ell}`) and Forrelated blocks. For the exact sampler the latter is
/// approximated by `2/pi`, for the Gaussian one by `2^{-ell} + eps^2`. The
/// `calibrate` command measures both.
pub fn nominal_threshold(ell: u32, sampler: ForrelatedSampler) -> f64 {
    let base = pow(2.0, -(ell as f64));
    let hi = match sampler {
        ForrelatedSampler::Exact => 2.0 / core::f64::consts::PI,
        ForrelatedSampler::Gaussian { eps } => {
            let e = eps.unwrap_or_else(|| default_epsilon(ell));
            base + e * e
        }
    };
    ((base + hi) / 2.0).clamp(1e-9, 1.0 - 1e-9)
}

/// Repetitions so that a Hoeffding bound on one block's decode error is at
/// most `2^{-n} / bits` given an acceptance gap `gap` between the two block
/// types.
pub fn amplified_repetitions(bits: usize, n: u32, gap: f64) -> u32 {
    let half = (gap / 2.0).max(1e-3);
    let target = log(bits.max(1) as f64) + n as f64 * core::f64::consts::LN_2;
    let reps = target / (2.0 * half * half);
    (libm::ceil(reps) as u32).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    /// Direct double sum, independent of the transform.
    fn phi_direct(inst: &ForrelationInstance) -> f64 {
        let n = inst.f().len();
        let mut s = 0i64;
        for x in 0..n {
            for y in 0..n {
                let fx = if inst.f().get(x) { -1 } else { 1 };
                let gy = if inst.g().get(y) { -1 } else { 1 };
                let chi = if (x & y).count_ones() % 2 == 0 { 1 } else { -1 };
                s += fx * chi * gy;
            }
        }
        s as f64 / pow(n as f64, 1.5)
    }

    fn inst(f: &str, g: &str) -> ForrelationInstance {
        ForrelationInstance::new(
            TruthTable::from_bit_str(f).unwrap(),
            TruthTable::from_bit_str(g).unwrap(),
            Provenance::Uniform,
        )
        .unwrap()
    }

    #[test]
    fn smallest_uniform_instance() {
        let i = sample_uniform_instance(0, 99).unwrap();
        assert_eq!(i.f().len(), 1);
        assert_eq!(i.g().len(), 1);
        assert_eq!(i.block_len(), 2);
        assert_eq!(i.provenance(), Provenance::Uniform);
    }

    #[test]
    fn uniform_sampler_is_deterministic() {
        assert_eq!(sample_uniform_instance(3, 7).unwrap(), sample_uniform_instance(3, 7).unwrap());
        assert_ne!(sample_uniform_instance(3, 7).unwrap(), sample_uniform_instance(3, 8).unwrap());
        assert!(sample_uniform_instance(21, 0).is_err());
    }

    #[test]
    fn phi_fixed_points() {
        assert_eq!(forrelation_value(&inst("0", "0")), 1.0);
        let v = forrelation_value(&inst("00", "01"));
        assert!((v - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((phi_direct(&inst("00", "01")) - v).abs() < 1e-12);
    }

    #[test]
    fn phi_matches_direct_sum_and_is_bounded() {
        let mut rng = rng_from_seed(5);
        for ell in 0..=5 {
            for _ in 0..20 {
                let i = uniform_with(ell, &mut rng).unwrap();
                let v = forrelation_value(&i);
                assert!((v - phi_direct(&i)).abs() < 1e-12);
                assert!(v.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn exact_sampler_constant_function() {
        let f = TruthTable::zeros(3).unwrap();
        let g = spectral_sign(&f);
        assert_eq!(g.count_ones(), 0);
        // All spectral mass sits on y = 0, so Phi = 2^{-ell/2}.
        let i = ForrelationInstance::new(f, g, Provenance::ExactForrelated).unwrap();
        assert!((forrelation_value(&i) - pow(2.0, -1.5)).abs() < 1e-12);
    }

    #[test]
    fn bent_function_is_perfectly_forrelated() {
        // Inner product x1 x2 ^ x3 x4 has a flat spectrum, hence Phi = 1 and
        // the test accepts with probability 1.
        let f = TruthTable::from_fn(4, |x| ((x & 1) & (x >> 1) & 1) ^ ((x >> 2) & (x >> 3) & 1) == 1)
            .unwrap();
        let g = spectral_sign(&f);
        let i = ForrelationInstance::new(f, g, Provenance::ExactForrelated).unwrap();
        assert!((forrelation_value(&i) - 1.0).abs() < 1e-12);
        assert!((acceptance_probability(&i) - 1.0).abs() < 1e-9);
        let mut rng = rng_from_seed(0);
        assert_eq!(count_acceptances(&i, 64, &mut rng), 64);
        assert!(quantum_forrelation_test(&i, 16, 0.5, &mut rng).unwrap());
    }

    #[test]
    fn exact_sampler_ell2_direct_transform() {
        // F = (1,-1,-1,1): coefficients (0, 0, 0, 4) computed by hand, so no
        // negative entries and g = 0000.
        let f = TruthTable::from_bit_str("0110").unwrap();
        assert_eq!(spectral_sign(&f), TruthTable::from_bit_str("0000").unwrap());
        // F = (1,1,1,-1): coefficients (2, 2, 2, -2).
        let f = TruthTable::from_bit_str("0001").unwrap();
        assert_eq!(spectral_sign(&f), TruthTable::from_bit_str("0001").unwrap());
    }

    #[test]
    fn exact_phi_is_normalised_l1_spectrum() {
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let i = exact_forrelated_with(5, &mut rng).unwrap();
            let n = 32usize;
            let l1: f64 = (0..n)
                .map(|y| {
                    let c: i64 = (0..n)
                        .map(|x| {
                            let fx = if i.f().get(x) { -1 } else { 1 };
                            if (x & y).count_ones() % 2 == 0 { fx } else { -fx }
                        })
                        .sum();
                    (c as f64 / n as f64).abs()
                })
                .sum();
            let expected = l1 / sqrt(n as f64);
            assert!((forrelation_value(&i) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_rejects_bad_epsilon() {
        assert_eq!(sample_gaussian_forrelated(3, 0.0, 1), Err(Error::InvalidEpsilon));
        assert_eq!(sample_gaussian_forrelated(3, 1.5, 1), Err(Error::InvalidEpsilon));
        assert!(sample_gaussian_forrelated(3, 1.0, 1).is_ok());
        assert!(sample_gaussian_forrelated(0, 0.5, 1).is_err());
    }

    #[test]
    fn acceptance_equals_phi_squared() {
        let mut rng = rng_from_seed(21);
        for ell in 1..=6 {
            for _ in 0..5 {
                let i = exact_forrelated_with(ell, &mut rng).unwrap();
                let phi = forrelation_value(&i);
                assert!((acceptance_probability(&i) - phi * phi).abs() < 1e-9);
                let u = uniform_with(ell, &mut rng).unwrap();
                let phi = forrelation_value(&u);
                assert!((acceptance_probability(&u) - phi * phi).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn test_rejects_bad_parameters() {
        let i = sample_uniform_instance(2, 1).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(quantum_forrelation_test(&i, 0, 0.5, &mut rng).is_err());
        assert!(quantum_forrelation_test(&i, 4, 1.0, &mut rng).is_err());
    }

    #[test]
    fn uniform_second_moment_exact_enumeration() {
        // E[Phi^2] = 2^{-ell} over all (f, g) pairs.
        for ell in 0..=3u32 {
            let n = 1usize << ell;
            let tables = 1usize << n;
            let mut total = 0.0;
            for fi in 0..tables {
                for gi in 0..tables {
                    let f = TruthTable::from_fn(ell, |x| (fi >> x) & 1 == 1).unwrap();
                    let g = TruthTable::from_fn(ell, |x| (gi >> x) & 1 == 1).unwrap();
                    let v = forrelation_value(&ForrelationInstance::new(f, g, Provenance::Uniform).unwrap());
                    total += v * v;
                }
            }
            let mean = total / (tables * tables) as f64;
            assert!((mean - pow(2.0, -(ell as f64))).abs() < 1e-12, "ell={ell}: {mean}");
        }
    }

    #[test]
    fn repetitions_grow_with_security_parameter() {
        let a = amplified_repetitions(12, 4, 0.6);
        let b = amplified_repetitions(12, 8, 0.6);
        assert!(b > a && a >= 1);
        assert!(nominal_threshold(8, ForrelatedSampler::Exact) > 0.3);
    }
}
