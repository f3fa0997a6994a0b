//! Statevector simulation of phase-oracle query algorithms.
//!
//! Basis state `x` assigns qubit `q` the value of bit `q` of `x`. A phase
//! oracle call on register `qubits` with `offset` maps `|x>` to
//! `(-1)^{o[offset + idx(x)]} |x>` where `idx(x) = sum_j x[qubits[j]] 2^j`.
//! Every call adds, for each oracle position, the probability mass of the
//! basis states that address it.

use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, sin, sqrt};
use num_complex::Complex64;
use rand::{Rng, RngCore};

use crate::{Error, Result};

pub const MAX_QUBITS: usize = 20;

/// Tolerance on `sum |amp|^2 = 1` after every layer.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Read access to the bits a program queries.
pub trait BitOracle {
    fn len(&self) -> usize;
    fn bit(&self, position: usize) -> bool;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl BitOracle for [bool] {
    fn len(&self) -> usize {
        <[bool]>::len(self)
    }
    fn bit(&self, position: usize) -> bool {
        self[position]
    }
}

impl BitOracle for Vec<bool> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn bit(&self, position: usize) -> bool {
        self[position]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    H(usize),
    HAll,
    /// Arbitrary single-qubit unitary, row-major.
    Unitary { qubit: usize, matrix: [[Complex64; 2]; 2] },
    Cnot { control: usize, target: usize },
    PhaseOracle { qubits: Vec<usize>, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryProgram {
    pub num_qubits: usize,
    pub ops: Vec<Op>,
}

impl QueryProgram {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, ops: Vec::new() }
    }

    pub fn push(&mut self, op: Op) -> &mut Self {
        self.ops.push(op);
        self
    }

    /// `H^ell . O_g . H^ell . O_f . H^ell` on `ell` qubits, with `f` at
    /// oracle positions `0..2^ell` and `g` at `2^ell..2^{ell+1}`.
    pub fn forrelation(ell: usize) -> Self {
        let reg: Vec<usize> = (0..ell).collect();
        let mut p = Self::new(ell);
        p.push(Op::HAll)
            .push(Op::PhaseOracle { qubits: reg.clone(), offset: 0 })
            .push(Op::HAll)
            .push(Op::PhaseOracle { qubits: reg, offset: 1 << ell })
            .push(Op::HAll);
        p
    }

    pub fn oracle_calls(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, Op::PhaseOracle { .. })).count()
    }

    /// Smallest oracle length covering every queried position.
    pub fn oracle_span(&self) -> usize {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Op::PhaseOracle { qubits, offset } => Some(offset + (1usize << qubits.len())),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// A random program of `layers` gate layers interleaved with `calls`
    /// oracle calls, each over a random register of `reg_qubits` qubits and
    /// confined to the first `oracle_len` positions.
    pub fn random<R: RngCore + ?Sized>(
        num_qubits: usize,
        calls: usize,
        reg_qubits: usize,
        oracle_len: usize,
        rng: &mut R,
    ) -> Self {
        assert!(reg_qubits <= num_qubits && (1usize << reg_qubits) <= oracle_len);
        let mut p = Self::new(num_qubits);
        p.push(Op::HAll);
        for _ in 0..calls {
            for _ in 0..num_qubits {
                let q = rng.random_range(0..num_qubits);
                if num_qubits > 1 && rng.random_bool(0.3) {
                    let mut t = rng.random_range(0..num_qubits - 1);
                    if t >= q {
                        t += 1;
                    }
                    p.push(Op::Cnot { control: q, target: t });
                } else {
                    p.push(Op::Unitary { qubit: q, matrix: random_unitary(rng) });
                }
            }
            let mut pool: Vec<usize> = (0..num_qubits).collect();
            let mut reg = Vec::with_capacity(reg_qubits);
            for _ in 0..reg_qubits {
                reg.push(pool.swap_remove(rng.random_range(0..pool.len())));
            }
            let max_off = oracle_len - (1 << reg_qubits);
            let offset = rng.random_range(0..=max_off);
            p.push(Op::PhaseOracle { qubits: reg, offset });
        }
        for q in 0..num_qubits {
            p.push(Op::Unitary { qubit: q, matrix: random_unitary(rng) });
        }
        p
    }
}

fn random_unitary<R: RngCore + ?Sized>(rng: &mut R) -> [[Complex64; 2]; 2] {
    let tau = core::f64::consts::TAU;
    let theta = rng.random::<f64>() * core::f64::consts::FRAC_PI_2;
    let (alpha, beta, gamma) =
        (rng.random::<f64>() * tau, rng.random::<f64>() * tau, rng.random::<f64>() * tau);
    let a = Complex64::from_polar(cos(theta), alpha);
    let b = Complex64::from_polar(sin(theta), beta);
    let g = Complex64::from_polar(1.0, gamma);
    [[a, -b.conj() * g], [b, a.conj() * g]]
}

/// Final state of a simulated run plus its query-mass ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAlgorithmRun {
    pub num_qubits: usize,
    pub amplitudes: Vec<Complex64>,
    /// Accumulated query mass per oracle position.
    pub query_mass: Vec<f64>,
    pub oracle_calls: usize,
    /// Largest `| sum |amp|^2 - 1 |` seen after any layer.
    pub max_norm_error: f64,
}

impl QueryAlgorithmRun {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn probability_of(&self, basis: usize) -> f64 {
        self.amplitudes[basis].norm_sqr()
    }

    pub fn total_query_mass(&self) -> f64 {
        self.query_mass.iter().sum()
    }

    pub fn mass_on(&self, positions: &[usize]) -> f64 {
        positions.iter().map(|&i| self.query_mass[i]).sum()
    }

    /// Total-variation distance between the two runs' measurement
    /// distributions in the computational basis.
    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
            .sum::<f64>()
    }

    pub fn measure<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.random();
        for (i, a) in self.amplitudes.iter().enumerate() {
            u -= a.norm_sqr();
            if u < 0.0 {
                return i;
            }
        }
        self.amplitudes.len() - 1
    }
}

/// Simulates `program` from `|0...0>` against `oracle`.
pub fn run_query_algorithm<O: BitOracle + ?Sized>(
    program: &QueryProgram,
    oracle: &O,
) -> Result<QueryAlgorithmRun> {
    let nq = program.num_qubits;
    if nq > MAX_QUBITS {
        return Err(Error::QubitOutOfRange { qubit: nq, num_qubits: MAX_QUBITS });
    }
    validate(program, oracle.len())?;

    let dim = 1usize << nq;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[0] = Complex64::new(1.0, 0.0);
    let mut mass = vec![0.0; oracle.len()];
    let mut max_norm_error = 0.0f64;
    let s = 1.0 / sqrt(2.0);

    for op in &program.ops {
        match op {
            Op::H(q) => hadamard(&mut amps, *q, s),
            Op::HAll => {
                for q in 0..nq {
                    hadamard(&mut amps, q, s);
                }
            }
            Op::Unitary { qubit, matrix } => {
                let bit = 1usize << qubit;
                for i in 0..dim {
                    if i & bit == 0 {
                        let (a, b) = (amps[i], amps[i | bit]);
                        amps[i] = matrix[0][0] * a + matrix[0][1] * b;
                        amps[i | bit] = matrix[1][0] * a + matrix[1][1] * b;
                    }
                }
            }
            Op::Cnot { control, target } => {
                let (c, t) = (1usize << control, 1usize << target);
                for i in 0..dim {
                    if i & c != 0 && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            Op::PhaseOracle { qubits, offset } => {
                for (x, amp) in amps.iter_mut().enumerate() {
                    let idx = qubits
                        .iter()
                        .enumerate()
                        .fold(0usize, |acc, (j, &q)| acc | (((x >> q) & 1) << j));
                    let pos = offset + idx;
                    mass[pos] += amp.norm_sqr();
                    if oracle.bit(pos) {
                        *amp = -*amp;
                    }
                }
            }
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        max_norm_error = max_norm_error.max((norm - 1.0).abs());
    }
    debug_assert!(max_norm_error <= NORM_TOLERANCE);

    Ok(QueryAlgorithmRun {
        num_qubits: nq,
        amplitudes: amps,
        query_mass: mass,
        oracle_calls: program.oracle_calls(),
        max_norm_error,
    })
}

fn validate(program: &QueryProgram, oracle_len: usize) -> Result<()> {
    let nq = program.num_qubits;
    let check = |q: usize| {
        if q >= nq {
            Err(Error::QubitOutOfRange { qubit: q, num_qubits: nq })
        } else {
            Ok(())
        }
    };
    for op in &program.ops {
        match op {
            Op::H(q) | Op::Unitary { qubit: q, .. } => check(*q)?,
            Op::HAll => {}
            Op::Cnot { control, target } => {
                check(*control)?;
                check(*target)?;
                if control == target {
                    return Err(Error::InvalidParameter("CNOT control equals target"));
                }
            }
            Op::PhaseOracle { qubits, offset } => {
                for &q in qubits {
                    check(q)?;
                }
                let last = offset + (1usize << qubits.len()) - 1;
                if last >= oracle_len {
                    return Err(Error::OracleOutOfRange { position: last, available: oracle_len });
                }
            }
        }
    }
    Ok(())
}

fn hadamard(amps: &mut [Complex64], q: usize, s: f64) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a, b) = (amps[i], amps[i | bit]);
            amps[i] = (a + b) * s;
            amps[i | bit] = (a - b) * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn no_oracle_calls_means_no_mass() {
        let mut p = QueryProgram::new(3);
        p.push(Op::HAll).push(Op::Cnot { control: 0, target: 2 });
        let run = run_query_algorithm(&p, &vec![true; 8]).unwrap();
        assert_eq!(run.total_query_mass(), 0.0);
        assert!(run.max_norm_error < NORM_TOLERANCE);
    }

    #[test]
    fn forrelation_program_spends_unit_mass_per_call() {
        let mut rng = rng_from_seed(1);
        let bits: Vec<bool> = (0..32).map(|_| rng.random()).collect();
        let run = run_query_algorithm(&QueryProgram::forrelation(4), &bits).unwrap();
        assert!((run.total_query_mass() - 2.0).abs() < 1e-12);
        assert_eq!(run.oracle_calls, 2);
    }

    #[test]
    fn missing_positions_rejected() {
        let p = QueryProgram::forrelation(3);
        let err = run_query_algorithm(&p, &vec![false; 10]).unwrap_err();
        assert_eq!(err, Error::OracleOutOfRange { position: 15, available: 10 });
    }

    #[test]
    fn bad_qubits_rejected() {
        let mut p = QueryProgram::new(2);
        p.push(Op::H(2));
        assert!(run_query_algorithm(&p, &vec![false; 1]).is_err());
    }

    #[test]
    fn hadamard_twice_is_identity() {
        let mut p = QueryProgram::new(2);
        p.push(Op::HAll).push(Op::HAll);
        let run = run_query_algorithm(&p, &Vec::<bool>::new()).unwrap();
        assert!((run.probability_of(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_programs_stay_normalised() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let p = QueryProgram::random(5, 3, 3, 16, &mut rng);
            let bits: Vec<bool> = (0..16).map(|_| rng.random()).collect();
            let run = run_query_algorithm(&p, &bits).unwrap();
            assert!(run.max_norm_error < NORM_TOLERANCE);
            assert!((run.total_query_mass() - 3.0).abs() < 1e-9);
        }
    }
}
