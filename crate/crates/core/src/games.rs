//! Security games and resampling experiments.
//!
//! Adversaries get an [`OracleHandle`]: queries to `A` and `B`, the
//! amplified decoder, and the challenge. The handle holds the world only as
//! an [`EncodedOracle`], so plaintext is out of reach. Every query is
//! charged against an optional cap; a decode costs two queries per
//! repetition.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore};

use crate::ac0::Ac0Circuit;
use crate::bits::{BitString, TruthTable};
use crate::crypto::{
    decode_budget, key_exchange, ot_run, ot_sender_message, pke_budget, pke_dec, pke_enc, pke_gen, towf_eval, towf_inv,
    Decoder, QuantumAccess,
};
use crate::forrelation::{acceptance_probability, quantum_forrelation_test};
use crate::exec::TrialExecutor;
use crate::nporacle::NpOracleB;
use crate::oracle::{
    resample_block, sample_prf_world, sample_trapdoor_world, BlockId, EncodedOracle, OracleWorld,
    ScaleProfile, Selector, WorldKind,
};
use crate::rng::{derive_path, derive_seed, rng_from_seed, tags, SimRng};
use crate::stats::{difference, null_sigma, Estimate, Proportion, RunningMean, Verdict};
use crate::{Error, Result};

/// `T = 10 n^2`.
pub fn default_query_cap(n: u32) -> u64 {
    10 * (n as u64) * (n as u64)
}

/// The oracle part of a challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChallengeOracle {
    None,
    /// A one-bit function given by its table.
    Table(TruthTable),
    /// Row `k` of the PRF, evaluated by decoding `A`.
    PrfRow { k: u64 },
    /// A function listed on its support; other inputs map to `default`.
    Sparse { output_len: usize, map: BTreeMap<u64, u64>, default: u64 },
}

/// Public inputs and oracle handed to an adversary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub inputs: Vec<BitString>,
    pub oracle: ChallengeOracle,
}

impl Challenge {
    pub fn none() -> Self {
        Self { inputs: Vec::new(), oracle: ChallengeOracle::None }
    }

    pub fn function(table: TruthTable) -> Self {
        Self { inputs: Vec::new(), oracle: ChallengeOracle::Table(table) }
    }

    pub fn strings(inputs: Vec<BitString>) -> Self {
        Self { inputs, oracle: ChallengeOracle::None }
    }
}

/// Oracle access for one adversary run.
pub struct OracleHandle<'w> {
    world: &'w dyn EncodedOracle,
    b: NpOracleB<'w>,
    challenge: Challenge,
    queries: u64,
    cap: Option<u64>,
    measure: SimRng,
}

impl<'w> OracleHandle<'w> {
    pub fn new(world: &'w dyn EncodedOracle, challenge: Challenge, cap: Option<u64>, measure_seed: u64) -> Self {
        Self { world, b: NpOracleB::new(world), challenge, queries: 0, cap, measure: rng_from_seed(measure_seed) }
    }

    pub fn profile(&self) -> &ScaleProfile {
        self.world.profile()
    }

    pub fn kind(&self) -> WorldKind {
        self.world.kind()
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn challenge(&self) -> &Challenge {
        &self.challenge
    }

    pub fn inputs(&self) -> &[BitString] {
        &self.challenge.inputs
    }

    fn charge(&mut self, cost: u64) -> Result<()> {
        if let Some(cap) = self.cap {
            if self.queries + cost > cap {
                return Err(Error::QueryBudget { cap });
            }
        }
        self.queries += cost;
        Ok(())
    }

    pub fn query_a(&mut self, address: &[bool]) -> Result<bool> {
        self.charge(1)?;
        Ok(self.world.read_a(address))
    }

    pub fn query_b(&mut self, query: &[bool]) -> Result<bool> {
        self.charge(1)?;
        Ok(self.b.query(query))
    }

    /// Evaluates the challenge oracle at `x`.
    pub fn query_challenge(&mut self, x: &BitString) -> Result<BitString> {
        let xv = x.to_u64().ok_or(Error::InvalidParameter("challenge input too long"))?;
        match &self.challenge.oracle {
            ChallengeOracle::None => Err(Error::Protocol("this challenge has no oracle".to_string())),
            ChallengeOracle::Table(t) => {
                if x.len() != t.ell() as usize {
                    return Err(Error::LengthMismatch { expected: t.ell() as usize, got: x.len() });
                }
                let v = t.get(xv as usize);
                self.charge(1)?;
                Ok(BitString::from_bits(vec![v]))
            }
            ChallengeOracle::PrfRow { k } => {
                let k = *k;
                let n = self.profile().n as usize;
                if x.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: x.len() });
                }
                Ok(BitString::from_bits(vec![self.decode(BlockId::Prf { k, x: xv })?]))
            }
            ChallengeOracle::Sparse { output_len, map, default } => {
                let v = map.get(&xv).copied().unwrap_or(*default);
                let len = *output_len;
                self.charge(1)?;
                Ok(BitString::from_u64(v, len))
            }
        }
    }

    /// Runs `f` with a different challenge, restoring the original after.
    pub fn with_challenge<T>(&mut self, challenge: Challenge, f: impl FnOnce(&mut Self) -> T) -> T {
        let saved = core::mem::replace(&mut self.challenge, challenge);
        let out = f(self);
        self.challenge = saved;
        out
    }
}

impl QuantumAccess for OracleHandle<'_> {
    fn profile(&self) -> &ScaleProfile {
        self.world.profile()
    }

    fn kind(&self) -> WorldKind {
        self.world.kind()
    }

    fn decode(&mut self, id: BlockId) -> Result<bool> {
        let reps = self.world.profile().reps;
        self.charge(2 * reps as u64)?;
        crate::oracle::decode_bit(self.world, id, reps, &mut self.measure)
    }
}

/// A single-bit-output adversary.
pub trait Adversary: Sync {
    fn name(&self) -> String;
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool>;
}

/// An adversary that outputs a preimage candidate for `y` under `pk`.
pub trait Inverter: Sync {
    fn name(&self) -> String;
    fn invert(
        &self,
        oracle: &mut OracleHandle<'_>,
        pk: &BitString,
        y: &BitString,
        coins: &mut dyn RngCore,
    ) -> Result<BitString>;
}

impl<T: Adversary + ?Sized> Adversary for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        (**self).run(oracle, coins)
    }
}

impl<T: Inverter + ?Sized> Inverter for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn invert(&self, o: &mut OracleHandle<'_>, pk: &BitString, y: &BitString, c: &mut dyn RngCore) -> Result<BitString> {
        (**self).invert(o, pk, y, c)
    }
}

/// Always outputs the same bit.
#[derive(Debug, Clone, Copy)]
pub struct ConstantAdversary(pub bool);

impl Adversary for ConstantAdversary {
    fn name(&self) -> String {
        format!("constant-{}", self.0 as u8)
    }
    fn run(&self, _: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        Ok(self.0)
    }
}

/// Outputs a fair coin.
#[derive(Debug, Clone, Copy)]
pub struct CoinAdversary;

impl Adversary for CoinAdversary {
    fn name(&self) -> String {
        "coin".to_string()
    }
    fn run(&self, _: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        Ok(coins.random())
    }
}

/// Reads the challenge function everywhere, decodes every key row and
/// outputs 1 iff some row equals the challenge. Makes `2^n` challenge
/// queries and `4^n` decodes.
#[derive(Debug, Clone, Copy)]
pub struct DecodeAndCompare;

fn read_challenge_table(oracle: &mut OracleHandle<'_>) -> Result<Vec<bool>> {
    let n = oracle.profile().n as usize;
    (0..1u64 << n).map(|x| Ok(oracle.query_challenge(&BitString::from_u64(x, n))?.get(0))).collect()
}

fn some_row_matches(oracle: &mut OracleHandle<'_>, h: &[bool]) -> Result<bool> {
    let n = oracle.profile().n;
    'rows: for k in 0..1u64 << n {
        for (x, &hx) in h.iter().enumerate() {
            if oracle.decode(BlockId::Prf { k, x: x as u64 })? != hx {
                continue 'rows;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

impl Adversary for DecodeAndCompare {
    fn name(&self) -> String {
        "decode-and-compare".to_string()
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        let h = read_challenge_table(oracle)?;
        some_row_matches(oracle, &h)
    }
}

/// Like [`DecodeAndCompare`] but outputs 1 with probability `on_match` when
/// a row matches and `otherwise` when none does. With 3/4 and 1/4 its
/// advantage is close to 1/2 once `2^n / 2^{2^n}` is negligible.
#[derive(Debug, Clone, Copy)]
pub struct BiasedMatch {
    pub on_match: f64,
    pub otherwise: f64,
}

impl Adversary for BiasedMatch {
    fn name(&self) -> String {
        format!("biased-match-{}-{}", self.on_match, self.otherwise)
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        let h = read_challenge_table(oracle)?;
        let p = if some_row_matches(oracle, &h)? { self.on_match } else { self.otherwise };
        Ok(coins.random::<f64>() < p)
    }
}

/// Asks `B` a fixed list of strings and outputs the parity of the answers.
#[derive(Debug, Clone)]
pub struct BOnlyAdversary {
    pub queries: Vec<BitString>,
}

impl Adversary for BOnlyAdversary {
    fn name(&self) -> String {
        "b-only".to_string()
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        let mut acc = false;
        for q in &self.queries {
            acc ^= oracle.query_b(q.as_slice())?;
        }
        Ok(acc)
    }
}

/// Outputs `A` at one address.
#[derive(Debug, Clone)]
pub struct ReadBitAdversary {
    pub address: BitString,
}

impl Adversary for ReadBitAdversary {
    fn name(&self) -> String {
        format!("read-bit-{}", self.address)
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        oracle.query_a(self.address.as_slice())
    }
}

/// One input of a circuit adversary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowBit {
    /// `A` at an address.
    A(BitString),
    /// Bit `bit` of the challenge oracle's answer at `x`.
    Challenge { x: BitString, bit: usize },
    /// Bit `bit` of challenge input `index`.
    Input { index: usize, bit: usize },
}

/// A circuit over a declared window of oracle and challenge bits.
#[derive(Debug, Clone)]
pub struct CircuitAdversary {
    pub circuit: Ac0Circuit,
    pub window: Vec<WindowBit>,
}

impl CircuitAdversary {
    pub fn new(circuit: Ac0Circuit, window: Vec<WindowBit>) -> Result<Self> {
        if circuit.num_inputs() != window.len() {
            return Err(Error::LengthMismatch { expected: circuit.num_inputs(), got: window.len() });
        }
        Ok(Self { circuit, window })
    }
}

impl Adversary for CircuitAdversary {
    fn name(&self) -> String {
        format!("circuit-size{}-depth{}", self.circuit.size(), self.circuit.depth())
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        let mut input = Vec::with_capacity(self.window.len());
        for w in &self.window {
            input.push(match w {
                WindowBit::A(a) => oracle.query_a(a.as_slice())?,
                WindowBit::Challenge { x, bit } => {
                    let v = oracle.query_challenge(x)?;
                    *bit < v.len() && v.get(*bit)
                }
                WindowBit::Input { index, bit } => {
                    let s = oracle.inputs().get(*index).ok_or(Error::Protocol("missing challenge input".to_string()))?;
                    *bit < s.len() && s.get(*bit)
                }
            });
        }
        self.circuit.evaluate(&input)
    }
}

/// Outputs the all-zero string.
#[derive(Debug, Clone, Copy)]
pub struct TrivialInverter;

impl Inverter for TrivialInverter {
    fn name(&self) -> String {
        "trivial".to_string()
    }
    fn invert(&self, o: &mut OracleHandle<'_>, _: &BitString, _: &BitString, _: &mut dyn RngCore) -> Result<BitString> {
        Ok(BitString::zeros(o.profile().n as usize))
    }
}

/// Outputs a uniform string.
#[derive(Debug, Clone, Copy)]
pub struct RandomInverter;

impl Inverter for RandomInverter {
    fn name(&self) -> String {
        "random-guess".to_string()
    }
    fn invert(&self, o: &mut OracleHandle<'_>, _: &BitString, _: &BitString, c: &mut dyn RngCore) -> Result<BitString> {
        Ok(BitString::random(o.profile().n as usize, c))
    }
}

/// Inverts with the trapdoor found in challenge input 2; only games that
/// reveal the trapdoor supply one. Without it the guess is all zeros.
#[derive(Debug, Clone, Copy)]
pub struct TrapdoorInverter;

impl Inverter for TrapdoorInverter {
    fn name(&self) -> String {
        "trapdoor-holder".to_string()
    }
    fn invert(&self, o: &mut OracleHandle<'_>, _: &BitString, y: &BitString, _: &mut dyn RngCore) -> Result<BitString> {
        let n = o.profile().n as usize;
        match o.inputs().get(2).cloned() {
            Some(td) => Ok(towf_inv(o, &td, y)?.unwrap_or_else(|| BitString::zeros(n))),
            None => Ok(BitString::zeros(n)),
        }
    }
}

/// `c xor d xor A(challenge)`, where `d` is `A`'s output on `f_k` for a
/// fresh key when the coin `c` is 1 and on a fresh random function when it
/// is 0. Makes exactly two inner runs per decision.
pub struct AdvantageSquared<A> {
    inner: A,
    runs: AtomicU64,
}

pub fn advantage_squaring_wrap<A: Adversary>(inner: A) -> AdvantageSquared<A> {
    AdvantageSquared { inner, runs: AtomicU64::new(0) }
}

impl<A> AdvantageSquared<A> {
    pub fn inner_runs(&self) -> u64 {
        self.runs.load(Ordering::Relaxed)
    }
}

impl<A: Adversary> Adversary for AdvantageSquared<A> {
    fn name(&self) -> String {
        format!("squared({})", self.inner.name())
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        let n = oracle.profile().n;
        let c: bool = coins.random();
        let simulated = if c {
            ChallengeOracle::PrfRow { k: coins.random_range(0..1u64 << n) }
        } else {
            ChallengeOracle::Table(TruthTable::random(n, coins)?)
        };
        let challenge = Challenge { inputs: oracle.inputs().to_vec(), oracle: simulated };
        self.runs.fetch_add(1, Ordering::Relaxed);
        let d = oracle.with_challenge(challenge, |o| self.inner.run(o, coins))?;
        self.runs.fetch_add(1, Ordering::Relaxed);
        let e = self.inner.run(oracle, coins)?;
        Ok(c ^ d ^ e)
    }
}

/// Distinguisher for public keys built from an inverter: pick `x`, set
/// `y = Eval(pk, x)`, ask the inverter once and accept iff its answer maps
/// to `y`. The key is challenge input 0.
pub struct FakePkDistinguisher<I> {
    inverter: I,
    calls: AtomicU64,
}

pub fn fake_pk_adversary_wrap<I: Inverter>(inverter: I) -> FakePkDistinguisher<I> {
    FakePkDistinguisher { inverter, calls: AtomicU64::new(0) }
}

impl<I> FakePkDistinguisher<I> {
    pub fn inverter_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<I: Inverter> Adversary for FakePkDistinguisher<I> {
    fn name(&self) -> String {
        format!("fake-pk({})", self.inverter.name())
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        let n = oracle.profile().n as usize;
        let pk = oracle.inputs().first().cloned().ok_or(Error::Protocol("no public key".to_string()))?;
        let x = BitString::random(n, coins);
        let y = towf_eval(oracle, &pk, &x)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let guess = self.inverter.invert(oracle, &pk, &y, coins)?;
        if guess.len() != n {
            return Ok(false);
        }
        Ok(towf_eval(oracle, &pk, &guess)? == y)
    }
}

/// Accepts iff `F(pk, inverter(pk, y)) = y`, evaluating `F` by decoding.
/// Challenge inputs are `[pk, y]`.
pub struct Checker<I> {
    pub inverter: I,
}

impl<I: Inverter> Adversary for Checker<I> {
    fn name(&self) -> String {
        format!("checker({})", self.inverter.name())
    }
    fn run(&self, oracle: &mut OracleHandle<'_>, coins: &mut dyn RngCore) -> Result<bool> {
        let n = oracle.profile().n as usize;
        let (pk, y) = match oracle.inputs() {
            [pk, y, ..] => (pk.clone(), y.clone()),
            _ => return Err(Error::Protocol("checker needs pk and y".to_string())),
        };
        let x = self.inverter.invert(oracle, &pk, &y, coins)?;
        if x.len() != n {
            return Ok(false);
        }
        Ok(towf_eval(oracle, &pk, &x)? == y)
    }
}

/// A row of a report: one estimate, optionally compared with a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub estimate: Estimate,
    pub bound: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl ReportRow {
    pub fn plain(name: &str, estimate: Estimate) -> Self {
        Self { name: name.to_string(), estimate, bound: None, verdict: None }
    }

    /// Proportion checked against `rate <= bound + 3 sigma`.
    pub fn at_most(name: &str, p: Proportion, bound: f64) -> Self {
        Self { name: name.to_string(), estimate: p.estimate(), bound: Some(bound), verdict: Some(Verdict::at_most(p, bound)) }
    }

    /// Proportion checked against `rate >= bound - 3 sigma`.
    pub fn at_least(name: &str, p: Proportion, bound: f64) -> Self {
        Self { name: name.to_string(), estimate: p.estimate(), bound: Some(bound), verdict: Some(Verdict::at_least(p, bound)) }
    }
}

/// Result of one experiment. Contains nothing time- or host-dependent, so
/// equal inputs give equal reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: Vec<(String, String)>,
    pub seed: u64,
    pub trials: u64,
    pub rows: Vec<ReportRow>,
    pub budgets: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, cfg: &GameConfig) -> Self {
        let p = &cfg.profile;
        let params = vec![
            ("n".to_string(), format!("{}", p.n)),
            ("ell".to_string(), format!("{}", p.ell)),
            ("sampler".to_string(), sampler_name(p)),
            ("reps".to_string(), format!("{}", p.reps)),
            ("threshold".to_string(), format!("{}", p.threshold)),
            ("query_cap".to_string(), cfg.query_cap.map_or("none".to_string(), |c| format!("{c}"))),
        ];
        Self { experiment: experiment.to_string(), params, seed: cfg.seed, trials: cfg.trials, rows: Vec::new(), budgets: Vec::new(), notes: Vec::new() }
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn param(&mut self, key: &str, value: String) {
        self.params.push((key.to_string(), value));
    }
}

fn sampler_name(p: &ScaleProfile) -> String {
    match p.sampler {
        crate::forrelation::ForrelatedSampler::Exact => "exact".to_string(),
        crate::forrelation::ForrelatedSampler::Gaussian { eps: None } => "gaussian".to_string(),
        crate::forrelation::ForrelatedSampler::Gaussian { eps: Some(e) } => format!("gaussian:{e}"),
    }
}

/// What every game needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    pub profile: ScaleProfile,
    pub trials: u64,
    pub seed: u64,
    pub query_cap: Option<u64>,
}

impl GameConfig {
    pub fn new(profile: ScaleProfile, trials: u64, seed: u64) -> Self {
        Self { profile, trials, seed, query_cap: Some(default_query_cap(profile.n)) }
    }

    pub fn uncapped(mut self) -> Self {
        self.query_cap = None;
        self
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1"));
        }
        Ok(())
    }

    fn trial_seed(&self, t: u64, tag: u64) -> u64 {
        derive_path(self.seed, &[tags::TRIAL, t, tag])
    }

    /// Seed of the world used by trial `t`.
    pub fn world_seed(&self, t: u64) -> u64 {
        self.trial_seed(t, tags::WORLD)
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn run_adversary(
    world: &dyn EncodedOracle,
    adversary: &dyn Adversary,
    challenge: Challenge,
    cap: Option<u64>,
    seed: u64,
) -> Result<(bool, u64)> {
    let mut h = OracleHandle::new(world, challenge, cap, derive_seed(seed, tags::MEASURE));
    let mut coins = rng_from_seed(derive_seed(seed, tags::COINS));
    let out = adversary.run(&mut h, &mut coins)?;
    Ok((out, h.queries()))
}

/// `Pr[Adv^{f_k} = 1] - Pr[Adv^h = 1]` with a fresh world per trial.
pub fn run_prf_game<E: TrialExecutor>(cfg: &GameConfig, adversary: &dyn Adversary, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    let n = cfg.profile.n;
    let results = exec.map(cfg.trials, |t| -> Result<(bool, bool, u64)> {
        let world = sample_prf_world(&cfg.profile, cfg.trial_seed(t, tags::WORLD))?;
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let k = ch.random_range(0..1u64 << n);
        let h = TruthTable::random(n, &mut ch)?;
        let (real, q1) =
            run_adversary(&world, adversary, Challenge::function(world.f_row(k)), cfg.query_cap, cfg.trial_seed(t, 1))?;
        let (rand, q2) = run_adversary(&world, adversary, Challenge::function(h), cfg.query_cap, cfg.trial_seed(t, 2))?;
        Ok((real, rand, q1 + q2))
    });
    let mut real = Proportion::default();
    let mut rand = Proportion::default();
    let mut queries = RunningMean::default();
    for (a, b, q) in collect(results)? {
        real.record(a);
        rand.record(b);
        queries.push(q as f64 / 2.0);
    }
    let mut report = ExperimentReport::new("prf-game", cfg);
    report.param("adversary", adversary.name());
    let d = difference(real, rand);
    report.rows.push(ReportRow::plain("advantage", d));
    report.rows.push(ReportRow::plain("pr_real", real.estimate()));
    report.rows.push(ReportRow::plain("pr_random", rand.estimate()));
    report.rows.push(ReportRow::plain("queries_per_run", queries.estimate()));
    report.budgets.push(("decode_per_bit".to_string(), cfg.profile.nominal_decode_error()));
    Ok(report)
}

/// `Pr[Adv(G(td)) = 1] - Pr[Adv(pk*) = 1]` for uniform `td` and `pk*`.
pub fn run_pk_game<E: TrialExecutor>(cfg: &GameConfig, adversary: &dyn Adversary, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    let n = cfg.profile.n;
    let results = exec.map(cfg.trials, |t| -> Result<(bool, bool)> {
        let world = sample_trapdoor_world(&cfg.profile, cfg.trial_seed(t, tags::WORLD))?;
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let td = ch.random_range(0..1u64 << n);
        let fake = ch.random_range(0..1u64 << (3 * n));
        let pk = |v| Challenge::strings(vec![BitString::from_u64(v, 3 * n as usize)]);
        let (real, _) = run_adversary(&world, adversary, pk(world.g(td)), cfg.query_cap, cfg.trial_seed(t, 1))?;
        let (rand, _) = run_adversary(&world, adversary, pk(fake), cfg.query_cap, cfg.trial_seed(t, 2))?;
        Ok((real, rand))
    });
    let mut real = Proportion::default();
    let mut rand = Proportion::default();
    for (a, b) in collect(results)? {
        real.record(a);
        rand.record(b);
    }
    let mut report = ExperimentReport::new("pk-game", cfg);
    report.param("adversary", adversary.name());
    report.rows.push(ReportRow::plain("advantage", difference(real, rand)));
    report.rows.push(ReportRow::plain("pr_gen_pk", real.estimate()));
    report.rows.push(ReportRow::plain("pr_uniform_pk", rand.estimate()));
    Ok(report)
}

/// How a trapdoor inversion challenge is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkMode {
    /// `pk = G(td)` for uniform `td`.
    Gen,
    /// Uniform `pk`.
    Uniform,
}

/// Inversion success of `F(pk, .)` on `y = F(pk, x)` in both key modes,
/// plus the rate at which a uniform `y*` lies in the image of `F(pk*, .)`.
/// With `reveal_trapdoor` the Gen-mode challenge also carries `td`.
pub fn run_towf_invert_game<E: TrialExecutor>(
    cfg: &GameConfig,
    inverter: &dyn Inverter,
    reveal_trapdoor: bool,
    exec: &E,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let n = cfg.profile.n;
    let (nl, pl, ml) = (n as usize, 3 * n as usize, 6 * n as usize);
    let results = exec.map(cfg.trials, |t| -> Result<[bool; 3]> {
        let world = sample_trapdoor_world(&cfg.profile, cfg.trial_seed(t, tags::WORLD))?;
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let mut out = [false; 3];
        for (slot, mode) in [PkMode::Gen, PkMode::Uniform].into_iter().enumerate() {
            let td = ch.random_range(0..1u64 << n);
            let pk = match mode {
                PkMode::Gen => world.g(td),
                PkMode::Uniform => ch.random_range(0..1u64 << (3 * n)),
            };
            let x = ch.random_range(0..1u64 << n);
            let y = world.f(pk, x);
            let mut inputs = vec![BitString::from_u64(pk, pl), BitString::from_u64(y, ml)];
            if reveal_trapdoor && mode == PkMode::Gen {
                inputs.push(BitString::from_u64(td, nl));
            }
            let seed = cfg.trial_seed(t, 1 + slot as u64);
            let mut h = OracleHandle::new(&world, Challenge::strings(inputs.clone()), cfg.query_cap, derive_seed(seed, tags::MEASURE));
            let mut coins = rng_from_seed(derive_seed(seed, tags::COINS));
            let guess = inverter.invert(&mut h, &inputs[0], &inputs[1], &mut coins)?;
            out[slot] = guess.len() == nl && world.f(pk, guess.to_u64().unwrap_or(0)) == y;
        }
        let pk_star = ch.random_range(0..1u64 << (3 * n));
        let y_star = ch.random_range(0..1u64 << (6 * n));
        out[2] = world.f_inverse(pk_star, y_star).is_some();
        Ok(out)
    });
    let mut gen = Proportion::default();
    let mut uni = Proportion::default();
    let mut image = Proportion::default();
    for [a, b, c] in collect(results)? {
        gen.record(a);
        uni.record(b);
        image.record(c);
    }
    let mut report = ExperimentReport::new("towf-game", cfg);
    report.param("inverter", inverter.name());
    report.param("reveal_trapdoor", format!("{reveal_trapdoor}"));
    if reveal_trapdoor {
        report.rows.push(ReportRow::at_least("success_gen_pk", gen, 1.0 - 2.0 * pow2(-(n as i32))));
    } else {
        report.rows.push(ReportRow::plain("success_gen_pk", gen.estimate()));
    }
    report.rows.push(ReportRow::plain("success_uniform_pk", uni.estimate()));
    report.rows.push(ReportRow::at_most("image_membership", image, pow2(-5 * n as i32)));
    report.budgets.push(("inv".to_string(), decode_budget(&cfg.profile, nl + 1)));
    Ok(report)
}

fn pow2(e: i32) -> f64 {
    libm::pow(2.0, e as f64)
}

/// `g(k) = f_k(1) ... f_k(3n)` with input `i mod 2^n`.
pub fn owf_plaintext(world: &crate::oracle::PrfOracleWorld, k: u64) -> u64 {
    let n = world.profile().n as u64;
    (1..=3 * n).fold(0u64, |acc, i| (acc << 1) | world.f(k, i % (1 << n)) as u64)
}

/// Inverting `g(k)` for uniform `k`; the challenge inputs are `[empty, g(k)]`.
pub fn run_owf_invert_game<E: TrialExecutor>(cfg: &GameConfig, inverter: &dyn Inverter, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    let n = cfg.profile.n;
    let results = exec.map(cfg.trials, |t| -> Result<(bool, bool)> {
        let world = sample_prf_world(&cfg.profile, cfg.trial_seed(t, tags::WORLD))?;
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let k = ch.random_range(0..1u64 << n);
        let y = BitString::from_u64(owf_plaintext(&world, k), 3 * n as usize);
        let inputs = vec![BitString::new(), y.clone()];
        let seed = cfg.trial_seed(t, 1);
        let mut h = OracleHandle::new(&world, Challenge::strings(inputs), cfg.query_cap, derive_seed(seed, tags::MEASURE));
        let mut coins = rng_from_seed(derive_seed(seed, tags::COINS));
        let guess = inverter.invert(&mut h, &BitString::new(), &y, &mut coins)?;
        let ok = guess.len() == n as usize && owf_plaintext(&world, guess.to_u64().unwrap_or(0)) == y.to_u64().unwrap();
        let collide = (0..1u64 << n).any(|a| (0..a).any(|b| owf_plaintext(&world, a) == owf_plaintext(&world, b)));
        Ok((ok, collide))
    });
    let mut success = Proportion::default();
    let mut collisions = Proportion::default();
    for (a, b) in collect(results)? {
        success.record(a);
        collisions.record(b);
    }
    let mut report = ExperimentReport::new("owf-game", cfg);
    report.param("inverter", inverter.name());
    report.rows.push(ReportRow::plain("success", success.estimate()));
    report.rows.push(ReportRow::at_most("non_injective_worlds", collisions, pow2(-(n as i32))));
    Ok(report)
}

/// Which slice is planted and what the distinguisher gets as `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleConfig {
    /// PRF world; `z` is a uniform function `h`; a uniform key row is
    /// replaced by a uniform pattern.
    Prf,
    /// Trapdoor world; `z = (pk*, F^{-1}_{pk*})`; `G(td)` for a uniform
    /// `td` is set to `pk*` and `G(td)`, `I(td, .)` re-encoded.
    TrapdoorKey,
    /// Trapdoor world; `pk*` uniform outside `G`'s image, `z = (pk*, y*)`;
    /// `F(pk*, x)` for a uniform `x` is set to `y*`.
    TrapdoorImage,
}

/// `E_{A,z} |Pr_{k,w}[Adv^{A_{k->w}}(z) = 1] - Pr[Adv^A(z) = 1]|`, each inner
/// probability estimated from `inner` runs. Paired runs share coins and
/// measurement randomness, so an adversary that never touches the planted
/// slice scores exactly 0. The report also carries the rate of
/// `Adv^A(z) = 1`.
pub fn run_resample_experiment<E: TrialExecutor>(
    cfg: &GameConfig,
    config: ResampleConfig,
    adversary: &dyn Adversary,
    inner: u64,
    exec: &E,
) -> Result<ExperimentReport> {
    cfg.check()?;
    if inner == 0 {
        return Err(Error::InvalidParameter("inner trials must be at least 1"));
    }
    let p = cfg.profile;
    let n = p.n;
    let results = exec.map(cfg.trials, |t| -> Result<(f64, u64)> {
        let wseed = cfg.trial_seed(t, tags::WORLD);
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let (world, challenge) = match config {
            ResampleConfig::Prf => {
                let w = OracleWorld::Prf(sample_prf_world(&p, wseed)?);
                (w, Challenge::function(TruthTable::random(n, &mut ch)?))
            }
            ResampleConfig::TrapdoorKey => {
                let w = sample_trapdoor_world(&p, wseed)?;
                let pk = ch.random_range(0..1u64 << (3 * n));
                let mut map = BTreeMap::new();
                for x in (0..1u64 << n).rev() {
                    map.insert(w.f(pk, x), x << 1);
                }
                let oracle = ChallengeOracle::Sparse { output_len: n as usize + 1, map, default: 1 };
                let c = Challenge { inputs: vec![BitString::from_u64(pk, 3 * n as usize)], oracle };
                (OracleWorld::Trapdoor(w), c)
            }
            ResampleConfig::TrapdoorImage => {
                let w = sample_trapdoor_world(&p, wseed)?;
                let pk = loop {
                    let pk = ch.random_range(0..1u64 << (3 * n));
                    if !w.in_g_image(pk) {
                        break pk;
                    }
                };
                let y = ch.random_range(0..1u64 << (6 * n));
                let c = Challenge::strings(vec![BitString::from_u64(pk, 3 * n as usize), BitString::from_u64(y, 6 * n as usize)]);
                (OracleWorld::Trapdoor(w), c)
            }
        };
        let mut base = 0u64;
        let mut planted = 0u64;
        for j in 0..inner {
            let s = derive_path(cfg.seed, &[tags::TRIAL, t, tags::ADVERSARY, j]);
            base += run_adversary(&world, adversary, challenge.clone(), cfg.query_cap, derive_seed(s, 0))?.0 as u64;
            let mut rs = rng_from_seed(derive_seed(s, tags::RESAMPLE));
            let (selector, bits) = match (config, &world, &challenge.inputs[..]) {
                (ResampleConfig::Prf, _, _) => {
                    let k = rs.random_range(0..1u64 << n);
                    (Selector::PrfRow { k }, BitString::random(1 << n, &mut rs))
                }
                (ResampleConfig::TrapdoorKey, _, [pk, ..]) => {
                    (Selector::GRow { td: rs.random_range(0..1u64 << n) }, pk.clone())
                }
                (ResampleConfig::TrapdoorImage, _, [pk, y, ..]) => {
                    let x = rs.random_range(0..1u64 << n);
                    (Selector::FRow { pk: pk.to_u64().unwrap(), x }, y.clone())
                }
                _ => unreachable!("challenge built above"),
            };
            let planted_world = resample_block(&world, selector, bits.as_slice(), rs.random())?;
            planted += run_adversary(&planted_world, adversary, challenge.clone(), cfg.query_cap, derive_seed(s, 0))?.0 as u64;
        }
        let diff = (planted as f64 - base as f64).abs() / inner as f64;
        Ok((diff, base))
    });
    let mut diffs = RunningMean::default();
    let mut base = Proportion::default();
    for (d, b) in collect(results)? {
        diffs.push(d);
        base = base.merge(Proportion::new(b, inner));
    }
    let mut report = ExperimentReport::new("resample-exp", cfg);
    report.param("config", format!("{config:?}"));
    report.param("adversary", adversary.name());
    report.param("inner", format!("{inner}"));
    report.rows.push(ReportRow::plain("mean_abs_difference", diffs.estimate()));
    match config {
        ResampleConfig::TrapdoorImage => {
            let bound = pow2(n as i32 - 6 * n as i32);
            report.rows.push(ReportRow::at_most("base_accept_rate", base, bound));
        }
        _ => report.rows.push(ReportRow::plain("base_accept_rate", base.estimate())),
    }
    report.notes.push(format!("3-sigma at the bound uses sigma = {}", null_sigma(0.0, base.trials)));
    Ok(report)
}

/// Encrypt-then-decrypt and key-exchange agreement on fresh trapdoor
/// worlds, all evaluation by decoding.
pub fn run_pke_game<E: TrialExecutor>(cfg: &GameConfig, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    let results = exec.map(cfg.trials, |t| -> Result<(bool, bool)> {
        let world = sample_trapdoor_world(&cfg.profile, cfg.world_seed(t))?;
        let mut q = Decoder::new(&world, rng_from_seed(cfg.trial_seed(t, tags::MEASURE)));
        let coins = cfg.trial_seed(t, tags::COINS);
        let keys = pke_gen(&mut q, derive_seed(coins, 0))?;
        let m = rng_from_seed(derive_seed(coins, 1)).random::<bool>();
        let ct = pke_enc(&mut q, &keys.pk, m, derive_seed(coins, 2))?;
        let ok = pke_dec(&mut q, &keys.td, &ct)? == m;
        let ke = key_exchange(&mut q, derive_seed(coins, 3))?;
        Ok((ok, ke.agree()))
    });
    let mut pke = Proportion::default();
    let mut ke = Proportion::default();
    for (a, b) in collect(results)? {
        pke.record(a);
        ke.record(b);
    }
    let budget = pke_budget(&cfg.profile);
    let mut report = ExperimentReport::new("pke", cfg);
    report.rows.push(ReportRow::at_least("pke_correct", pke, 1.0 - budget));
    report.rows.push(ReportRow::plain("ke_agree", ke.estimate()));
    report.budgets.push(("pke_decode".to_string(), budget));
    report.budgets.push(("ke_decode".to_string(), (cfg.profile.n as f64 * budget).min(1.0)));
    Ok(report)
}

/// `Pr[z = x_choice]` for uniform inputs, plus how often a rerun of the
/// sender's next-message function reproduces its message.
pub fn run_ot_game<E: TrialExecutor>(cfg: &GameConfig, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    let results = exec.map(cfg.trials, |t| -> Result<(bool, bool)> {
        let world = sample_trapdoor_world(&cfg.profile, cfg.world_seed(t))?;
        let mut q = Decoder::new(&world, rng_from_seed(cfg.trial_seed(t, tags::MEASURE)));
        let mut ch = rng_from_seed(cfg.trial_seed(t, tags::CHALLENGE));
        let (x0, x1, c): (bool, bool, bool) = (ch.random(), ch.random(), ch.random());
        let tr = ot_run(&mut q, x0, x1, c, cfg.trial_seed(t, tags::COINS))?;
        let (_, _, coins, m1) = tr.sender_view();
        let rerun = ot_sender_message(&mut q, x0, x1, m1, coins)?;
        Ok((tr.output == if c { x1 } else { x0 }, rerun == tr.messages[1].1))
    });
    let mut correct = Proportion::default();
    let mut stable = Proportion::default();
    for (a, b) in collect(results)? {
        correct.record(a);
        stable.record(b);
    }
    let n = cfg.profile.n as usize;
    let budget = decode_budget(&cfg.profile, 6 * n + 12 * n + n + 1);
    let mut report = ExperimentReport::new("ot", cfg);
    report.rows.push(ReportRow::at_least("ot_correct", correct, 1.0 - budget));
    report.rows.push(ReportRow::at_least("sender_rerun_agree", stable, 1.0 - decode_budget(&cfg.profile, 12 * n)));
    report.budgets.push(("ot_decode".to_string(), budget));
    Ok(report)
}

/// Acceptance frequencies of uniform and Forrelated blocks, the midpoint
/// threshold, the repetitions Hoeffding asks for to reach `target_error`,
/// and measured decode error at the profile's repetitions.
pub fn run_calibration<E: TrialExecutor>(cfg: &GameConfig, target_error: f64, exec: &E) -> Result<ExperimentReport> {
    cfg.check()?;
    if !(target_error > 0.0 && target_error < 1.0) {
        return Err(Error::InvalidParameter("target error must lie in (0, 1)"));
    }
    let p = cfg.profile;
    let probe = exec.map(cfg.trials, |t| -> Result<(f64, f64)> {
        let mut rng = rng_from_seed(cfg.trial_seed(t, tags::ENCODING));
        let u = p.sampler.sample_block(false, p.ell, &mut rng)?;
        let f = p.sampler.sample_block(true, p.ell, &mut rng)?;
        Ok((acceptance_probability(&u), acceptance_probability(&f)))
    });
    let (mut acc0, mut acc1) = (RunningMean::default(), RunningMean::default());
    for (a, b) in collect(probe)? {
        acc0.push(a);
        acc1.push(b);
    }
    let threshold = 0.5 * (acc0.mean() + acc1.mean());
    let gap = 0.5 * (acc1.mean() - acc0.mean());
    let needed = if gap > 0.0 { libm::ceil(libm::log(1.0 / target_error) / (2.0 * gap * gap)) } else { f64::INFINITY };
    let calibrated = p.with_threshold(threshold.clamp(1e-9, 1.0 - 1e-9))?;
    let errors = exec.map(cfg.trials, |t| -> Result<(bool, bool)> {
        let mut rng = rng_from_seed(cfg.trial_seed(t, tags::MEASURE));
        let u = p.sampler.sample_block(false, p.ell, &mut rng)?;
        let f = p.sampler.sample_block(true, p.ell, &mut rng)?;
        let e0 = quantum_forrelation_test(&u, p.reps, calibrated.threshold, &mut rng)?;
        let e1 = !quantum_forrelation_test(&f, p.reps, calibrated.threshold, &mut rng)?;
        Ok((e0, e1))
    });
    let (mut err0, mut err1) = (Proportion::default(), Proportion::default());
    for (a, b) in collect(errors)? {
        err0.record(a);
        err1.record(b);
    }
    let mut report = ExperimentReport::new("calibrate", cfg);
    report.param("target_error", format!("{target_error}"));
    report.rows.push(ReportRow::plain("accept_uniform", acc0.estimate()));
    report.rows.push(ReportRow::plain("accept_forrelated", acc1.estimate()));
    report.rows.push(ReportRow::plain("threshold", Estimate::exact(threshold, cfg.trials)));
    report.rows.push(ReportRow::plain("reps_for_target", Estimate::exact(needed, cfg.trials)));
    report.rows.push(ReportRow::plain("decode_error_uniform", err0.estimate()));
    report.rows.push(ReportRow::plain("decode_error_forrelated", err1.estimate()));
    report.budgets.push(("hoeffding_per_block".to_string(), calibrated.nominal_decode_error()));
    Ok(report)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::nporacle::NpQuery;

    fn cfg(n: u32, ell: u32, trials: u64) -> GameConfig {
        GameConfig::new(ScaleProfile::desk(n, ell).unwrap().with_reps(24).unwrap(), trials, 7)
    }

    #[test]
    fn constant_adversary_has_zero_advantage() {
        let r = run_prf_game(&cfg(2, 5, 50), &ConstantAdversary(true), &Sequential).unwrap();
        assert_eq!(r.row("advantage").unwrap().estimate.value, 0.0);
    }

    #[test]
    fn query_cap_is_enforced() {
        let c = cfg(2, 5, 2);
        let err = run_prf_game(&c, &DecodeAndCompare, &Sequential).unwrap_err();
        assert_eq!(err, Error::QueryBudget { cap: 40 });
    }

    #[test]
    fn b_only_adversary_sees_nothing() {
        let qs = vec![
            NpQuery::new(0, vec![crate::nporacle::Node::Const(true)]).unwrap().encode(),
            BitString::parse_binary("0101110").unwrap(),
        ];
        let r = run_prf_game(&cfg(2, 5, 40), &BOnlyAdversary { queries: qs }, &Sequential).unwrap();
        assert_eq!(r.row("advantage").unwrap().estimate.value, 0.0);
    }

    #[test]
    fn wrapper_runs_inner_twice() {
        let w = advantage_squaring_wrap(ConstantAdversary(true));
        let world = sample_prf_world(&ScaleProfile::desk(2, 4).unwrap(), 1).unwrap();
        let mut h = OracleHandle::new(&world, Challenge::function(world.f_row(0)), None, 3);
        let mut coins = rng_from_seed(5);
        let mut ones = 0;
        for _ in 0..200 {
            ones += w.run(&mut h, &mut coins).unwrap() as u32;
        }
        assert_eq!(w.inner_runs(), 400);
        // constant inner: output is c, a fair coin
        assert!(ones > 60 && ones < 140);
    }

    #[test]
    fn reports_are_deterministic() {
        let c = cfg(2, 4, 20);
        let a = run_prf_game(&c, &CoinAdversary, &Sequential).unwrap();
        let b = run_prf_game(&c, &CoinAdversary, &Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resample_ignoring_adversary_is_exactly_zero() {
        let r = run_resample_experiment(&cfg(2, 4, 10), ResampleConfig::Prf, &ConstantAdversary(false), 4, &Sequential).unwrap();
        assert_eq!(r.row("mean_abs_difference").unwrap().estimate.value, 0.0);
    }

    #[test]
    fn fake_pk_wrapper_calls_inverter_once() {
        let p = ScaleProfile::desk(1, 4).unwrap().with_reps(16).unwrap();
        let world = sample_trapdoor_world(&p, 2).unwrap();
        let d = fake_pk_adversary_wrap(TrivialInverter);
        let pk = BitString::from_u64(world.g(0), 3);
        let mut h = OracleHandle::new(&world, Challenge::strings(vec![pk]), None, 1);
        let mut coins = rng_from_seed(0);
        for _ in 0..10 {
            d.run(&mut h, &mut coins).unwrap();
        }
        assert_eq!(d.inverter_calls(), 10);
    }
}
