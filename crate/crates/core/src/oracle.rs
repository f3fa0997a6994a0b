//! Forrelation-encoded oracle worlds.
//!
//! A world holds the hidden plaintext functions and, for each row of
//! encoded blocks, a seed. Block `j` of a row is drawn from the patterned
//! distribution with seed `derive_seed(row_seed, j)`, so encodings are never
//! stored but are bit-exact on every read.
//!
//! Address layouts (all fields most-significant bit first, `y` has
//! `ell + 1` bits and indexes `f || g` of the block):
//!
//! * PRF world: `k (n) | x (n) | y`.
//! * Trapdoor world: a two-bit region tag, then
//!   `00` G: `td (n) | i | y`,
//!   `01` F: `pk (3n) | x (n) | i | y`,
//!   `10` I: `td (n) | y' (6n) | i | y`,
//!   where `i` selects the output bit and is as wide as needed for the
//!   region's output length. I outputs are `n + 1` bits: `x` then a flag
//!   that is 1 for "no preimage".
//!
//! Anything else, including out-of-range `i` and tag `11`, reads 0.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::ac0::InputSampler;
use crate::bits::{BitString, TruthTable};
use crate::forrelation::{
    nominal_threshold, quantum_forrelation_test, ForrelatedSampler, ForrelationInstance,
    MAX_SAMPLER_ELL,
};
use crate::rng::{derive_path, derive_seed, rng_from_seed, tags};
use crate::{Error, Result};

/// Encoded bits a PRF world may address: keys * inputs * L.
pub const ENCODED_BIT_BUDGET: u128 = 1 << 30;

/// Stored plaintext bits of a trapdoor world, counted as 64-bit words.
pub const PLAINTEXT_BIT_BUDGET: u128 = 1 << 30;

/// Parameters shared by every world of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleProfile {
    pub n: u32,
    pub ell: u32,
    pub sampler: ForrelatedSampler,
    pub paper_exact: bool,
    /// Circuit runs per decoded bit.
    pub reps: u32,
    /// Acceptance frequency at or above which a block decodes to 1.
    pub threshold: f64,
}

impl ScaleProfile {
    /// Independent `(n, ell)`, exact sampler, 64 repetitions.
    pub fn desk(n: u32, ell: u32) -> Result<Self> {
        Self::custom(n, ell, ForrelatedSampler::Exact, 64)
    }

    pub fn custom(n: u32, ell: u32, sampler: ForrelatedSampler, reps: u32) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::InvalidParameter("n must lie in 1..=16"));
        }
        if ell == 0 || ell > MAX_SAMPLER_ELL {
            return Err(Error::EllOutOfRange { ell, max: MAX_SAMPLER_ELL });
        }
        if reps == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1"));
        }
        Ok(Self { n, ell, sampler, paper_exact: false, reps, threshold: nominal_threshold(ell, sampler) })
    }

    /// `L = 2^{4n}`.
    pub fn paper_prf(n: u32) -> Result<Self> {
        let mut p = Self::desk(n, 4 * n - 1)?;
        p.paper_exact = true;
        Ok(p)
    }

    /// `L = 2^{15n}`; only `n = 1` fits the sampler.
    pub fn paper_trapdoor(n: u32) -> Result<Self> {
        let ell = 15 * n - 1;
        if ell > MAX_SAMPLER_ELL {
            return Err(Error::EllOutOfRange { ell, max: MAX_SAMPLER_ELL });
        }
        let mut p = Self::desk(n, ell)?;
        p.paper_exact = true;
        Ok(p)
    }

    pub fn with_reps(mut self, reps: u32) -> Result<Self> {
        if reps == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1"));
        }
        self.reps = reps;
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter("threshold must lie in (0, 1)"));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// Bits per encoded block, `L = 2^{ell+1}`.
    pub fn block_len(&self) -> usize {
        1usize << (self.ell + 1)
    }

    /// Hoeffding bound on a single block's decode error, using the nominal
    /// acceptance of each block type. Only meaningful as a nominal figure.
    pub fn nominal_decode_error(&self) -> f64 {
        let lo = libm::pow(2.0, -(self.ell as f64));
        let hi = match self.sampler {
            ForrelatedSampler::Exact => 2.0 / core::f64::consts::PI,
            ForrelatedSampler::Gaussian { eps } => {
                let e = eps.unwrap_or_else(|| crate::forrelation::default_epsilon(self.ell));
                lo + e * e
            }
        };
        let gap = (self.threshold - lo).min(hi - self.threshold);
        if gap <= 0.0 {
            return 1.0;
        }
        libm::exp(-2.0 * self.reps as f64 * gap * gap).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorldKind {
    Prf,
    Trapdoor,
}

/// One encoded block of a world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockId {
    Prf { k: u64, x: u64 },
    G { td: u64, bit: u32 },
    F { pk: u64, x: u64, bit: u32 },
    I { td: u64, y: u64, bit: u32 },
}

/// Bits needed to write indices `0..count`, at least one.
pub fn index_width(count: u32) -> usize {
    (32 - count.saturating_sub(1).leading_zeros()).max(1) as usize
}

fn read_field(bits: &[bool], pos: &mut usize, width: usize) -> u64 {
    let v = bits[*pos..*pos + width].iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
    *pos += width;
    v
}

/// Address of bit `y` of a block.
pub fn block_address(kind: WorldKind, profile: &ScaleProfile, id: BlockId, y: usize) -> BitString {
    let n = profile.n as usize;
    let mut a = BitString::new();
    match (kind, id) {
        (WorldKind::Prf, BlockId::Prf { k, x }) => {
            a.push_u64(k, n);
            a.push_u64(x, n);
        }
        (WorldKind::Trapdoor, BlockId::G { td, bit }) => {
            a.push_u64(0, 2);
            a.push_u64(td, n);
            a.push_u64(bit as u64, index_width(3 * profile.n));
        }
        (WorldKind::Trapdoor, BlockId::F { pk, x, bit }) => {
            a.push_u64(1, 2);
            a.push_u64(pk, 3 * n);
            a.push_u64(x, n);
            a.push_u64(bit as u64, index_width(6 * profile.n));
        }
        (WorldKind::Trapdoor, BlockId::I { td, y: yy, bit }) => {
            a.push_u64(2, 2);
            a.push_u64(td, n);
            a.push_u64(yy, 6 * n);
            a.push_u64(bit as u64, index_width(profile.n + 1));
        }
        _ => panic!("block id does not belong to this world kind"),
    }
    a.push_u64(y as u64, profile.ell as usize + 1);
    a
}

/// Inverse of [`block_address`]; `None` for addresses that read 0.
pub fn parse_address(kind: WorldKind, profile: &ScaleProfile, addr: &[bool]) -> Option<(BlockId, usize)> {
    let n = profile.n as usize;
    let yw = profile.ell as usize + 1;
    let mut pos = 0;
    let id = match kind {
        WorldKind::Prf => {
            if addr.len() != 2 * n + yw {
                return None;
            }
            let k = read_field(addr, &mut pos, n);
            let x = read_field(addr, &mut pos, n);
            BlockId::Prf { k, x }
        }
        WorldKind::Trapdoor => {
            if addr.len() < 2 {
                return None;
            }
            let tag = read_field(addr, &mut pos, 2);
            let (body, outputs) = match tag {
                0 => (n, 3 * profile.n),
                1 => (4 * n, 6 * profile.n),
                2 => (7 * n, profile.n + 1),
                _ => return None,
            };
            let iw = index_width(outputs);
            if addr.len() != 2 + body + iw + yw {
                return None;
            }
            let id = match tag {
                0 => {
                    let td = read_field(addr, &mut pos, n);
                    let bit = read_field(addr, &mut pos, iw) as u32;
                    BlockId::G { td, bit }
                }
                1 => {
                    let pk = read_field(addr, &mut pos, 3 * n);
                    let x = read_field(addr, &mut pos, n);
                    let bit = read_field(addr, &mut pos, iw) as u32;
                    BlockId::F { pk, x, bit }
                }
                _ => {
                    let td = read_field(addr, &mut pos, n);
                    let y = read_field(addr, &mut pos, 6 * n);
                    let bit = read_field(addr, &mut pos, iw) as u32;
                    BlockId::I { td, y, bit }
                }
            };
            if id_bit(id) >= outputs {
                return None;
            }
            id
        }
    };
    let y = read_field(addr, &mut pos, yw) as usize;
    Some((id, y))
}

fn id_bit(id: BlockId) -> u32 {
    match id {
        BlockId::Prf { .. } => 0,
        BlockId::G { bit, .. } | BlockId::F { bit, .. } | BlockId::I { bit, .. } => bit,
    }
}

/// Read-only view of an encoded oracle `A`. This is everything algorithms
/// and adversaries may see of a world.
pub trait EncodedOracle: Sync {
    fn kind(&self) -> WorldKind;
    fn profile(&self) -> &ScaleProfile;
    /// Contents of a block, or `None` if no such block exists.
    fn block(&self, id: BlockId) -> Option<ForrelationInstance>;

    fn read_a(&self, address: &[bool]) -> bool {
        match parse_address(self.kind(), self.profile(), address) {
            Some((id, y)) => self.block(id).is_some_and(|b| b.bit(y)),
            None => false,
        }
    }
}

/// Bit of `A` at `address`; 0 for malformed addresses.
pub fn read_a(world: &dyn EncodedOracle, address: &[bool]) -> bool {
    world.read_a(address)
}

/// Runs the forrelation test on a block `repetitions` times and returns the
/// decoded pattern bit.
pub fn decode_bit(
    world: &dyn EncodedOracle,
    id: BlockId,
    repetitions: u32,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    let inst = world.block(id).ok_or(Error::InvalidParameter("no such block"))?;
    quantum_forrelation_test(&inst, repetitions, world.profile().threshold, rng)
}

fn encode_block(profile: &ScaleProfile, row_seed: u64, j: u64, bit: bool) -> ForrelationInstance {
    let mut rng = rng_from_seed(derive_seed(row_seed, j));
    profile
        .sampler
        .sample_block(bit, profile.ell, &mut rng)
        .expect("profile was validated")
}

/// `N` blocks drawn from `P_{z,L}`: block `i` Forrelated iff `z_i = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternedRegion {
    pattern: Vec<bool>,
    blocks: Vec<ForrelationInstance>,
}

impl PatternedRegion {
    pub fn sample(pattern: &[bool], ell: u32, sampler: ForrelatedSampler, seed: u64) -> Result<Self> {
        let mut blocks = Vec::with_capacity(pattern.len());
        for (i, &z) in pattern.iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            blocks.push(sampler.sample_block(z, ell, &mut rng)?);
        }
        Ok(Self { pattern: pattern.to_vec(), blocks })
    }

    pub fn pattern(&self) -> &[bool] {
        &self.pattern
    }

    pub fn blocks(&self) -> &[ForrelationInstance] {
        &self.blocks
    }

    /// `N * L`.
    pub fn serialized_len(&self) -> usize {
        self.blocks.iter().map(|b| b.block_len()).sum()
    }

    /// Flattened `f_1 g_1 f_2 g_2 ...` bits.
    pub fn bits(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.serialized_len());
        for b in &self.blocks {
            out.extend((0..b.block_len()).map(|y| b.bit(y)));
        }
        out
    }

    /// Every block's provenance agrees with its pattern bit.
    pub fn is_consistent(&self) -> bool {
        self.blocks.len() == self.pattern.len()
            && self.blocks.iter().zip(&self.pattern).all(|(b, &z)| b.provenance().is_forrelated() == z)
    }
}

/// `P_{S,L}`: a pattern drawn uniformly from `patterns`, then `P_{z,L}`.
/// With a single pattern this is `P_{z,L}`.
#[derive(Debug, Clone)]
pub struct PatternedDistribution {
    patterns: Vec<Vec<bool>>,
    ell: u32,
    sampler: ForrelatedSampler,
}

impl PatternedDistribution {
    pub fn new(patterns: Vec<Vec<bool>>, ell: u32, sampler: ForrelatedSampler) -> Result<Self> {
        let n = patterns.first().map(Vec::len).ok_or(Error::InvalidParameter("empty pattern set"))?;
        if patterns.iter().any(|p| p.len() != n) {
            return Err(Error::ShapeMismatch);
        }
        if ell == 0 || ell > MAX_SAMPLER_ELL {
            return Err(Error::EllOutOfRange { ell, max: MAX_SAMPLER_ELL });
        }
        Ok(Self { patterns, ell, sampler })
    }

    /// `P_{N,L}`: all-zero pattern, so every block is uniform.
    pub fn null(blocks: usize, ell: u32, sampler: ForrelatedSampler) -> Result<Self> {
        Self::new(vec![vec![false; blocks]], ell, sampler)
    }
}

impl InputSampler for PatternedDistribution {
    fn arity(&self) -> usize {
        self.patterns[0].len() << (self.ell + 1)
    }

    fn sample_input(&self, rng: &mut dyn RngCore) -> Vec<bool> {
        let z = &self.patterns[rng.random_range(0..self.patterns.len())];
        let mut out = Vec::with_capacity(self.arity());
        for &bit in z {
            let b = self.sampler.sample_block(bit, self.ell, rng).expect("validated");
            out.extend((0..b.block_len()).map(|y| b.bit(y)));
        }
        out
    }
}

/// A slice of a world that [`resample_block`] replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Key row `k` of a PRF world: `2^n` blocks.
    PrfRow { k: u64 },
    /// `G(td)` together with the whole `I(td, .)` slice it determines.
    GRow { td: u64 },
    /// `F(pk, x)`; `pk` must lie outside `G`'s image so that `I` is
    /// unaffected.
    FRow { pk: u64, x: u64 },
}

/// Oracle `A` for the quantum-computable PRF: one patterned row per key.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfOracleWorld {
    profile: ScaleProfile,
    seed: u64,
    /// `f_k(x)` at index `k * 2^n + x`.
    table: TruthTable,
    row_seeds: Vec<u64>,
}

/// Checks `keys * inputs * L <= 2^30`.
pub fn prf_budget(profile: &ScaleProfile) -> Result<()> {
    let needed = (1u128 << (2 * profile.n)) * profile.block_len() as u128;
    if needed > ENCODED_BIT_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: ENCODED_BIT_BUDGET });
    }
    Ok(())
}

pub fn sample_prf_world(profile: &ScaleProfile, seed: u64) -> Result<PrfOracleWorld> {
    prf_budget(profile)?;
    let mut rng = rng_from_seed(derive_seed(seed, tags::PLAINTEXT));
    let table = TruthTable::random(2 * profile.n, &mut rng)?;
    let row_seeds = (0..1u64 << profile.n).map(|k| derive_path(seed, &[tags::ENCODING, k])).collect();
    Ok(PrfOracleWorld { profile: *profile, seed, table, row_seeds })
}

impl PrfOracleWorld {
    /// Rebuilds a world from stored parts.
    pub fn from_parts(profile: ScaleProfile, seed: u64, table: TruthTable, row_seeds: Vec<u64>) -> Result<Self> {
        prf_budget(&profile)?;
        if table.ell() != 2 * profile.n || row_seeds.len() != 1usize << profile.n {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self { profile, seed, table, row_seeds })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn keys(&self) -> u64 {
        1 << self.profile.n
    }

    /// Plaintext `f_k(x)`; ground truth for tests and challengers.
    pub fn f(&self, k: u64, x: u64) -> bool {
        self.table.get(((k << self.profile.n) | x) as usize)
    }

    /// Plaintext row `f_k` as a table over `n` bits.
    pub fn f_row(&self, k: u64) -> TruthTable {
        TruthTable::from_fn(self.profile.n, |x| self.f(k, x as u64)).expect("n validated")
    }

    pub fn table(&self) -> &TruthTable {
        &self.table
    }

    pub fn row_seeds(&self) -> &[u64] {
        &self.row_seeds
    }

    /// Encoded row `\bar f_k` as a patterned region.
    pub fn region(&self, k: u64) -> PatternedRegion {
        let n = 1u64 << self.profile.n;
        let pattern: Vec<bool> = (0..n).map(|x| self.f(k, x)).collect();
        let blocks = (0..n).map(|x| self.block(BlockId::Prf { k, x }).unwrap()).collect();
        PatternedRegion { pattern, blocks }
    }

    pub fn all_blocks(&self) -> Vec<BlockId> {
        let n = 1u64 << self.profile.n;
        (0..n).flat_map(|k| (0..n).map(move |x| BlockId::Prf { k, x })).collect()
    }

    /// Bits of `A` in address order.
    pub fn encoded_bits(&self) -> usize {
        (1usize << (2 * self.profile.n)) * self.profile.block_len()
    }
}

impl EncodedOracle for PrfOracleWorld {
    fn kind(&self) -> WorldKind {
        WorldKind::Prf
    }

    fn profile(&self) -> &ScaleProfile {
        &self.profile
    }

    fn block(&self, id: BlockId) -> Option<ForrelationInstance> {
        match id {
            BlockId::Prf { k, x } if k < self.keys() && x < self.keys() => {
                Some(encode_block(&self.profile, self.row_seeds[k as usize], x, self.f(k, x)))
            }
            _ => None,
        }
    }
}

/// Oracle `A` for the trapdoor function: encodings of `G`, `F` and `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapdoorOracleWorld {
    profile: ScaleProfile,
    seed: u64,
    g: Vec<u64>,
    /// `F(pk, x)` at index `pk * 2^n + x`.
    f: Vec<u64>,
    g_seeds: Vec<u64>,
    i_seeds: Vec<u64>,
    f_seed_overrides: BTreeMap<u64, u64>,
}

/// Stored plaintext words of a trapdoor world must fit the budget.
pub fn trapdoor_budget(profile: &ScaleProfile) -> Result<()> {
    if 7 * profile.n > 64 {
        return Err(Error::ProfileInfeasible { needed: 7 * profile.n as usize, available: 64 });
    }
    let needed = ((1u128 << profile.n) + (1u128 << (4 * profile.n))) * 64;
    if needed > PLAINTEXT_BIT_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: PLAINTEXT_BIT_BUDGET });
    }
    Ok(())
}

pub fn sample_trapdoor_world(profile: &ScaleProfile, seed: u64) -> Result<TrapdoorOracleWorld> {
    trapdoor_budget(profile)?;
    let n = profile.n;
    let mut rng = rng_from_seed(derive_seed(seed, tags::PLAINTEXT));
    let g = (0..1u64 << n).map(|_| rng.random_range(0..1u64 << (3 * n))).collect();
    let f = (0..1u64 << (4 * n)).map(|_| rng.random_range(0..1u64 << (6 * n))).collect();
    Ok(TrapdoorOracleWorld {
        profile: *profile,
        seed,
        g,
        f,
        g_seeds: (0..1u64 << n).map(|td| derive_path(seed, &[tags::REGION_G, td])).collect(),
        i_seeds: (0..1u64 << n).map(|td| derive_path(seed, &[tags::REGION_I, td])).collect(),
        f_seed_overrides: BTreeMap::new(),
    })
}

/// Stored parts of a trapdoor world, as used by snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrapdoorParts {
    pub g: Vec<u64>,
    pub f: Vec<u64>,
    pub g_seeds: Vec<u64>,
    pub i_seeds: Vec<u64>,
    pub f_seed_overrides: BTreeMap<u64, u64>,
}

impl TrapdoorOracleWorld {
    pub fn from_parts(profile: ScaleProfile, seed: u64, parts: TrapdoorParts) -> Result<Self> {
        trapdoor_budget(&profile)?;
        let n = profile.n;
        let td_count = 1usize << n;
        if parts.g.len() != td_count
            || parts.f.len() != 1usize << (4 * n)
            || parts.g_seeds.len() != td_count
            || parts.i_seeds.len() != td_count
            || parts.g.iter().any(|&v| v >> (3 * n) != 0)
            || parts.f.iter().any(|&v| v >> (6 * n) != 0)
            || parts.f_seed_overrides.keys().any(|&k| k >> (4 * n) != 0)
        {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            profile,
            seed,
            g: parts.g,
            f: parts.f,
            g_seeds: parts.g_seeds,
            i_seeds: parts.i_seeds,
            f_seed_overrides: parts.f_seed_overrides,
        })
    }

    pub fn parts(&self) -> TrapdoorParts {
        TrapdoorParts {
            g: self.g.clone(),
            f: self.f.clone(),
            g_seeds: self.g_seeds.clone(),
            i_seeds: self.i_seeds.clone(),
            f_seed_overrides: self.f_seed_overrides.clone(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `lambda = 3n`.
    pub fn pk_len(&self) -> usize {
        3 * self.profile.n as usize
    }

    /// `m = 6n`.
    pub fn image_len(&self) -> usize {
        6 * self.profile.n as usize
    }

    /// Plaintext `G(td)`.
    pub fn g(&self, td: u64) -> u64 {
        self.g[td as usize]
    }

    /// Plaintext `F(pk, x)`.
    pub fn f(&self, pk: u64, x: u64) -> u64 {
        self.f[((pk << self.profile.n) | x) as usize]
    }

    /// Smallest `x` with `F(pk, x) = y`.
    pub fn f_inverse(&self, pk: u64, y: u64) -> Option<u64> {
        (0..1u64 << self.profile.n).find(|&x| self.f(pk, x) == y)
    }

    /// Plaintext `I(td, y)`.
    pub fn i(&self, td: u64, y: u64) -> Option<u64> {
        self.f_inverse(self.g(td), y)
    }

    /// `I(td, y)` as its `n + 1`-bit serialisation.
    pub fn i_word(&self, td: u64, y: u64) -> u64 {
        match self.i(td, y) {
            Some(x) => x << 1,
            None => 1,
        }
    }

    pub fn in_g_image(&self, pk: u64) -> bool {
        self.g.contains(&pk)
    }

    /// Whether `F(pk, .)` is injective.
    pub fn f_injective(&self, pk: u64) -> bool {
        let mut ys: Vec<u64> = (0..1u64 << self.profile.n).map(|x| self.f(pk, x)).collect();
        ys.sort_unstable();
        ys.windows(2).all(|w| w[0] != w[1])
    }

    fn f_row_seed(&self, pk: u64, x: u64) -> u64 {
        let idx = (pk << self.profile.n) | x;
        self.f_seed_overrides
            .get(&idx)
            .copied()
            .unwrap_or_else(|| derive_path(self.seed, &[tags::REGION_F, idx]))
    }

    fn i_row_seed(&self, td: u64, y: u64) -> u64 {
        derive_seed(self.i_seeds[td as usize], y)
    }

    /// Every block id; only sensible at tiny `n`.
    pub fn all_blocks(&self) -> Vec<BlockId> {
        let n = self.profile.n;
        let mut out = Vec::new();
        for td in 0..1u64 << n {
            out.extend((0..3 * n).map(|bit| BlockId::G { td, bit }));
        }
        for pk in 0..1u64 << (3 * n) {
            for x in 0..1u64 << n {
                out.extend((0..6 * n).map(|bit| BlockId::F { pk, x, bit }));
            }
        }
        for td in 0..1u64 << n {
            for y in 0..1u64 << (6 * n) {
                out.extend((0..n + 1).map(|bit| BlockId::I { td, y, bit }));
            }
        }
        out
    }

    /// Number of encoded bits across all three regions.
    pub fn encoded_bits(&self) -> u128 {
        let n = self.profile.n as u128;
        let blocks = (1u128 << n) * 3 * n + (1u128 << (4 * n)) * 6 * n + (1u128 << (7 * n)) * (n + 1);
        blocks * self.profile.block_len() as u128
    }

    /// Plaintext bit behind a block.
    pub fn pattern_bit(&self, id: BlockId) -> Option<bool> {
        let n = self.profile.n;
        let msb = |v: u64, width: u32, bit: u32| (v >> (width - 1 - bit)) & 1 == 1;
        match id {
            BlockId::G { td, bit } if td < 1 << n && bit < 3 * n => Some(msb(self.g(td), 3 * n, bit)),
            BlockId::F { pk, x, bit } if pk < 1 << (3 * n) && x < 1 << n && bit < 6 * n => {
                Some(msb(self.f(pk, x), 6 * n, bit))
            }
            BlockId::I { td, y, bit } if td < 1 << n && y < 1 << (6 * n) && bit < n + 1 => {
                Some(msb(self.i_word(td, y), n + 1, bit))
            }
            _ => None,
        }
    }
}

impl EncodedOracle for TrapdoorOracleWorld {
    fn kind(&self) -> WorldKind {
        WorldKind::Trapdoor
    }

    fn profile(&self) -> &ScaleProfile {
        &self.profile
    }

    fn block(&self, id: BlockId) -> Option<ForrelationInstance> {
        let bit = self.pattern_bit(id)?;
        let (row_seed, j) = match id {
            BlockId::G { td, bit } => (self.g_seeds[td as usize], bit),
            BlockId::F { pk, x, bit } => (self.f_row_seed(pk, x), bit),
            BlockId::I { td, y, bit } => (self.i_row_seed(td, y), bit),
            BlockId::Prf { .. } => return None,
        };
        Some(encode_block(&self.profile, row_seed, j as u64, bit))
    }
}

/// Either kind of world.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleWorld {
    Prf(PrfOracleWorld),
    Trapdoor(TrapdoorOracleWorld),
}

impl OracleWorld {
    pub fn as_oracle(&self) -> &dyn EncodedOracle {
        match self {
            OracleWorld::Prf(w) => w,
            OracleWorld::Trapdoor(w) => w,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            OracleWorld::Prf(w) => w.seed(),
            OracleWorld::Trapdoor(w) => w.seed(),
        }
    }

    pub fn all_blocks(&self) -> Vec<BlockId> {
        match self {
            OracleWorld::Prf(w) => w.all_blocks(),
            OracleWorld::Trapdoor(w) => w.all_blocks(),
        }
    }

    pub fn pattern_bit(&self, id: BlockId) -> Option<bool> {
        match (self, id) {
            (OracleWorld::Prf(w), BlockId::Prf { k, x }) if k < w.keys() && x < w.keys() => Some(w.f(k, x)),
            (OracleWorld::Trapdoor(w), id) => w.pattern_bit(id),
            _ => None,
        }
    }
}

impl EncodedOracle for OracleWorld {
    fn kind(&self) -> WorldKind {
        self.as_oracle().kind()
    }

    fn profile(&self) -> &ScaleProfile {
        self.as_oracle().profile()
    }

    fn block(&self, id: BlockId) -> Option<ForrelationInstance> {
        self.as_oracle().block(id)
    }
}

/// Returns a copy of `world` whose selected slice has plaintext
/// `new_bits` and a fresh encoding seeded from `seed`.
pub fn resample_block(world: &OracleWorld, selector: Selector, new_bits: &[bool], seed: u64) -> Result<OracleWorld> {
    match (world, selector) {
        (OracleWorld::Prf(w), Selector::PrfRow { k }) => {
            let n = w.profile.n;
            if k >= w.keys() {
                return Err(Error::InvalidParameter("key out of range"));
            }
            if new_bits.len() != 1usize << n {
                return Err(Error::LengthMismatch { expected: 1 << n, got: new_bits.len() });
            }
            let mut out = w.clone();
            for (x, &b) in new_bits.iter().enumerate() {
                out.table.set(((k << n) as usize) | x, b);
            }
            out.row_seeds[k as usize] = derive_path(seed, &[tags::RESAMPLE, k]);
            Ok(OracleWorld::Prf(out))
        }
        (OracleWorld::Trapdoor(w), Selector::GRow { td }) => {
            let n = w.profile.n;
            if td >= 1 << n {
                return Err(Error::InvalidParameter("trapdoor out of range"));
            }
            let pk = bits_to_word(new_bits, 3 * n as usize)?;
            let mut out = w.clone();
            out.g[td as usize] = pk;
            out.g_seeds[td as usize] = derive_path(seed, &[tags::RESAMPLE, tags::REGION_G, td]);
            out.i_seeds[td as usize] = derive_path(seed, &[tags::RESAMPLE, tags::REGION_I, td]);
            Ok(OracleWorld::Trapdoor(out))
        }
        (OracleWorld::Trapdoor(w), Selector::FRow { pk, x }) => {
            let n = w.profile.n;
            if pk >= 1 << (3 * n) || x >= 1 << n {
                return Err(Error::InvalidParameter("F row out of range"));
            }
            if w.in_g_image(pk) {
                return Err(Error::InvalidParameter("F rows may only be resampled outside G's image"));
            }
            let y = bits_to_word(new_bits, 6 * n as usize)?;
            let mut out = w.clone();
            let idx = (pk << n) | x;
            out.f[idx as usize] = y;
            out.f_seed_overrides.insert(idx, derive_path(seed, &[tags::RESAMPLE, tags::REGION_F, idx]));
            Ok(OracleWorld::Trapdoor(out))
        }
        _ => Err(Error::InvalidParameter("selector does not match the world kind")),
    }
}

fn bits_to_word(bits: &[bool], width: usize) -> Result<u64> {
    if bits.len() != width {
        return Err(Error::LengthMismatch { expected: width, got: bits.len() });
    }
    Ok(bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
}

/// Blocks a selector covers. `GRow` also covers `I(td, .)`.
pub fn selector_blocks(world: &OracleWorld, selector: Selector) -> Vec<BlockId> {
    let n = world.profile().n;
    match selector {
        Selector::PrfRow { k } => (0..1u64 << n).map(|x| BlockId::Prf { k, x }).collect(),
        Selector::GRow { td } => {
            let mut v: Vec<BlockId> = (0..3 * n).map(|bit| BlockId::G { td, bit }).collect();
            for y in 0..1u64 << (6 * n) {
                v.extend((0..n + 1).map(|bit| BlockId::I { td, y, bit }));
            }
            v
        }
        Selector::FRow { pk, x } => (0..6 * n).map(|bit| BlockId::F { pk, x, bit }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prf(n: u32, ell: u32, seed: u64) -> PrfOracleWorld {
        sample_prf_world(&ScaleProfile::desk(n, ell).unwrap(), seed).unwrap()
    }

    #[test]
    fn prf_size_and_determinism() {
        let w = prf(2, 7, 1);
        assert_eq!(w.encoded_bits(), 4096);
        assert_eq!(w, prf(2, 7, 1));
        assert_ne!(w.block(BlockId::Prf { k: 0, x: 0 }), prf(2, 7, 2).block(BlockId::Prf { k: 0, x: 0 }));
        for id in w.all_blocks() {
            let BlockId::Prf { k, x } = id else { unreachable!() };
            assert_eq!(w.block(id).unwrap().provenance().is_forrelated(), w.f(k, x));
        }
        assert!(w.region(3).is_consistent());
        assert_eq!(w.region(3).serialized_len(), 4 * 256);
    }

    #[test]
    fn budget_enforced() {
        let p = ScaleProfile::desk(8, 16).unwrap();
        assert!(matches!(sample_prf_world(&p, 0), Err(Error::BudgetExceeded { .. })));
        let p = ScaleProfile::desk(10, 4).unwrap();
        assert!(sample_trapdoor_world(&p, 0).is_err());
        assert!(ScaleProfile::paper_trapdoor(2).is_err());
        assert_eq!(ScaleProfile::paper_trapdoor(1).unwrap().block_len(), 1 << 15);
        assert_eq!(ScaleProfile::paper_prf(2).unwrap().block_len(), 1 << 8);
    }

    #[test]
    fn addresses_round_trip() {
        let w = prf(2, 3, 5);
        for id in w.all_blocks() {
            let inst = w.block(id).unwrap();
            for y in 0..16 {
                let a = block_address(WorldKind::Prf, w.profile(), id, y);
                assert_eq!(parse_address(WorldKind::Prf, w.profile(), a.as_slice()), Some((id, y)));
                assert_eq!(w.read_a(a.as_slice()), inst.bit(y));
            }
        }
        assert!(!w.read_a(&[true; 3]));
        assert!(!w.read_a(&[true; 20]));
    }

    #[test]
    fn trapdoor_addresses_and_malformed_tags() {
        let p = ScaleProfile::desk(1, 2).unwrap();
        let w = sample_trapdoor_world(&p, 9).unwrap();
        for id in w.all_blocks() {
            let a = block_address(WorldKind::Trapdoor, &p, id, 5);
            assert_eq!(parse_address(WorldKind::Trapdoor, &p, a.as_slice()), Some((id, 5)));
        }
        // out-of-range output index: G has 3 bits at n = 1, index width 2
        let mut bad = BitString::new();
        bad.push_u64(0, 2);
        bad.push_u64(0, 1);
        bad.push_u64(3, 2);
        bad.push_u64(0, 3);
        assert_eq!(parse_address(WorldKind::Trapdoor, &p, bad.as_slice()), None);
        let mut tag3 = BitString::new();
        tag3.push_u64(3, 2);
        tag3.push_u64(0, 6);
        assert!(!w.read_a(tag3.as_slice()));
    }

    #[test]
    fn inverse_is_smallest_preimage() {
        let p = ScaleProfile::desk(2, 3).unwrap();
        for seed in 0..20 {
            let w = sample_trapdoor_world(&p, seed).unwrap();
            for td in 0..4 {
                let pk = w.g(td);
                // brute-force image
                let mut image = BTreeMap::new();
                for x in (0..4).rev() {
                    image.insert(w.f(pk, x), x);
                }
                for (&y, &x) in &image {
                    assert_eq!(w.i(td, y), Some(x));
                }
                let mut rng = rng_from_seed(seed);
                for _ in 0..50 {
                    let y = rng.random_range(0..1u64 << 12);
                    if !image.contains_key(&y) {
                        assert_eq!(w.i(td, y), None);
                        assert_eq!(w.i_word(td, y), 1);
                    }
                }
                if w.f_injective(pk) {
                    for x in 0..4 {
                        assert_eq!(w.i(td, w.f(pk, x)), Some(x));
                    }
                }
            }
        }
    }

    #[test]
    fn prf_resample_is_local() {
        let w = OracleWorld::Prf(prf(2, 3, 11));
        let OracleWorld::Prf(orig) = &w else { unreachable!() };
        let old: Vec<bool> = (0..4).map(|x| orig.f(1, x)).collect();
        let w2 = resample_block(&w, Selector::PrfRow { k: 1 }, &old, 77).unwrap();
        let OracleWorld::Prf(new) = &w2 else { unreachable!() };
        assert_eq!(new.table(), orig.table());
        let mut changed = 0;
        for id in w.all_blocks() {
            let (a, b) = (w.block(id).unwrap(), w2.block(id).unwrap());
            if let BlockId::Prf { k: 1, .. } = id {
                changed += (a != b) as usize;
            } else {
                assert_eq!(a, b);
            }
        }
        assert!(changed > 0);
        assert!(resample_block(&w, Selector::PrfRow { k: 1 }, &[true], 1).is_err());
        assert!(resample_block(&w, Selector::GRow { td: 0 }, &[true], 1).is_err());
    }

    #[test]
    fn f_resample_requires_pk_outside_image() {
        let p = ScaleProfile::desk(1, 2).unwrap();
        let w = OracleWorld::Trapdoor(sample_trapdoor_world(&p, 3).unwrap());
        let OracleWorld::Trapdoor(t) = &w else { unreachable!() };
        let inside = t.g(0);
        assert!(resample_block(&w, Selector::FRow { pk: inside, x: 0 }, &[false; 6], 1).is_err());
        let outside = (0..8).find(|&pk| !t.in_g_image(pk)).unwrap();
        let w2 = resample_block(&w, Selector::FRow { pk: outside, x: 1 }, &[true; 6], 1).unwrap();
        let OracleWorld::Trapdoor(t2) = &w2 else { unreachable!() };
        assert_eq!(t2.f(outside, 1), 63);
    }

    #[test]
    fn decode_recovers_pattern() {
        let w = prf(2, 8, 4);
        let mut rng = rng_from_seed(1);
        for id in w.all_blocks() {
            let BlockId::Prf { k, x } = id else { unreachable!() };
            assert_eq!(decode_bit(&w, id, 64, &mut rng).unwrap(), w.f(k, x));
        }
        assert!(decode_bit(&w, BlockId::Prf { k: 0, x: 0 }, 0, &mut rng).is_err());
    }

    #[test]
    fn patterned_distribution_arity() {
        let d = PatternedDistribution::new(vec![vec![true, false]], 2, ForrelatedSampler::Exact).unwrap();
        assert_eq!(d.arity(), 16);
        assert_eq!(d.sample_input(&mut rng_from_seed(0)).len(), 16);
        assert!(PatternedDistribution::new(vec![vec![true], vec![]], 2, ForrelatedSampler::Exact).is_err());
    }
}
